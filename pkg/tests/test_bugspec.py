import json
import re

import pytest
from hypothesis import given, strategies as st

from flowaudit import MLK, NPD, UAF, Role, bug_type, find_sinks, find_sources, index_repository
from flowaudit.bugspec import BUG_TYPES, BugSpecConfig, ProgramValue, ReportRule
from flowaudit.errors import ConfigInvalid, UnsupportedBugType
from flowaudit.frontend import SourceLocation

from mockscripts import FIXTURES, fn, load


def test_report_rules():
    assert NPD.report_rule is ReportRule.REPORT_IF_SINK_REACHED
    assert UAF.report_rule is ReportRule.REPORT_IF_SINK_REACHED
    assert MLK.report_rule is ReportRule.REPORT_IF_NO_SINK_REACHED
    assert bug_type("NpD") is NPD
    with pytest.raises(UnsupportedBugType):
        bug_type("xss")


def test_nullret_npd_source_is_the_null_assigned_to_json():
    inv, _ = load("nullret")
    (src,) = find_sources(inv, "npd")
    assert (src.variable, src.line, src.receiver, src.role) == ("NULL", 4, "json", Role.SOURCE)
    assert src.function == fn(inv, "field2json").id


def test_no_null_literals_no_sources():
    inv, _ = load("plain")
    assert find_sources(inv, "npd") == []
    assert find_sinks(inv, "npd") == []


def test_nullret_sink_at_parse_msg_line_8():
    inv, _ = load("nullret")
    sinks = find_sinks(inv, "npd")
    pm = fn(inv, "parse_msg")
    assert any(s.function == pm.id and s.variable == "field_json" and s.line == 8 for s in sinks)


def test_allocations_in_line_order():
    inv, _ = load("allocs")
    text = (FIXTURES / "allocs" / "pool.c").read_text()
    # independent count: lines that assign the result of malloc/calloc
    expected = [i for i, ln in enumerate(text.splitlines(), 1) if re.search(r"=\s*(malloc|calloc)\(", ln)]
    sources = find_sources(inv, "mlk")
    assert [s.line for s in sources] == expected == [10, 11, 13, 14]
    assert [s.variable for s in sources] == ["p", "p->head", "scratch", "p->slots"]


def test_three_dereference_forms():
    inv, _ = load("derefs")
    sinks = find_sinks(inv, "npd")
    assert [(s.variable, s.line) for s in sinks] == [("p", 7), ("p", 8), ("p", 9)]


def test_nested_field_chain_gives_one_sink_per_step(tmp_path):
    (tmp_path / "n.c").write_text("int g(struct a *p)\n{\n    return p->next->val;\n}\n")
    inv = index_repository(tmp_path)
    assert sorted(s.variable for s in find_sinks(inv, "npd")) == ["p", "p->next"]


def test_uaf_sources_are_sinks_too():
    inv, _ = load("uaf")
    sources = find_sources(inv, "uaf")
    sinks = find_sinks(inv, "uaf")
    points = {(s.function, s.variable, s.line) for s in sinks}
    assert sources
    for s in sources:
        assert (s.function, s.variable, s.line) in points
    assert all(s.role is Role.SINK for s in sinks)


@pytest.mark.parametrize("name", ["allocs", "mlk_leak", "mlk_freed"])
def test_mlk_sources_and_sinks_disjoint(name):
    inv, _ = load(name)
    src = {(s.location.file, s.line) for s in find_sources(inv, "mlk")}
    snk = {(s.location.file, s.line) for s in find_sinks(inv, "mlk")}
    assert not src & snk


@pytest.mark.parametrize("name", ["nullret", "allocs", "derefs", "chain6", "uaf", "mlk_freed"])
@pytest.mark.parametrize("bug", sorted(BUG_TYPES))
def test_values_inside_their_functions_and_pure(name, bug):
    inv, _ = load(name)
    for finder in (find_sources, find_sinks):
        values = finder(inv, bug)
        assert values == finder(inv, bug)
        for v in values:
            assert inv.get(v.function).contains_line(v.line)


def test_user_allocator_from_config(tmp_path):
    (tmp_path / "a.c").write_text("void f(void)\n{\n    char *b = pool_get(8);\n    pool_put(b);\n}\n")
    cfg = BugSpecConfig.from_dict({"version": 1, "bug_types": {"mlk": {"allocators": ["pool_get"],
                                                                          "deallocators": ["pool_put"]}}})
    inv = index_repository(tmp_path)
    assert [s.variable for s in find_sources(inv, "mlk", cfg)] == ["b"]
    assert [s.line for s in find_sinks(inv, "mlk", cfg)] == [4]
    assert find_sources(inv, "mlk") == []


def test_bad_config_rejected(tmp_path):
    with pytest.raises(ConfigInvalid):
        BugSpecConfig.from_dict({"version": 1, "bug_types": {"mlk": {"allocators": ["not a name"]}}})
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"version": 2, "bug_types": {}}))
    with pytest.raises(ConfigInvalid):
        BugSpecConfig.load(path)


names = st.from_regex(r"[A-Za-z_][A-Za-z0-9_]{0,8}", fullmatch=True)


@given(names, st.integers(1, 500), st.integers(0, 80), st.sampled_from(list(Role)), st.one_of(st.none(), names))
def test_program_value_round_trip(var, line, col, role, receiver):
    v = ProgramValue(var, SourceLocation("x.c", line, col), "f" * 16, role, receiver)
    back = ProgramValue.from_dict(v.to_dict())
    assert back == v and back.receiver == v.receiver
