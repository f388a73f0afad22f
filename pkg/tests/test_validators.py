import logging
import random
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from flowaudit import Explorer, find_sources, index_repository
from flowaudit.bugspec import ProgramValue, Role
from flowaudit.errors import LocationOutsideFunction
from flowaudit.frontend import SourceLocation
from flowaudit.gateway import Gateway, MockBackend, Verdict
from flowaudit.memory import DataFlowFact, PathRecord
from flowaudit.validators import screen_path, validate_feasibility, validate_order

import loopfree
import mockscripts
from mockscripts import fn, load


def _value(f, var, line, role=Role.INTERMEDIATE):
    return ProgramValue(var, SourceLocation(f.file, line), f.id, role)


@pytest.fixture(scope="module")
def f2j():
    inv, _ = load("nullret")
    return fn(inv, "field2json")


def test_same_line_definition_is_consistent(f2j):
    null = ProgramValue("NULL", SourceLocation(f2j.file, 4, 31), f2j.id, Role.SOURCE, "json")
    (v,) = validate_order([DataFlowFact(null, _value(f2j, "json", 4))], f2j)
    assert v.consistent


def test_backwards_fact_is_a_violation(f2j):
    (v,) = validate_order([DataFlowFact(_value(f2j, "json", 14), _value(f2j, "json", 4))], f2j)
    assert not v.consistent and "cannot" in v.reason


def test_same_line_without_definition(f2j):
    (v,) = validate_order([DataFlowFact(_value(f2j, "type", 4), _value(f2j, "json", 4))], f2j)
    assert not v.consistent


def test_verdicts_keep_input_order(f2j):
    facts = [DataFlowFact(_value(f2j, "json", 4), _value(f2j, "json", 14)),
             DataFlowFact(_value(f2j, "json", 14), _value(f2j, "json", 4)),
             DataFlowFact(_value(f2j, "json", 6), _value(f2j, "json", 18))]
    assert [v.consistent for v in validate_order(facts, f2j)] == [True, False, True]


def test_foreign_value_raises(f2j):
    inv, _ = load("nullret")
    pm = fn(inv, "parse_msg")
    with pytest.raises(LocationOutsideFunction):
        validate_order([DataFlowFact(_value(pm, "field_json", 7), _value(pm, "field_json", 8))], f2j)


def test_impossible_statement_order_drops_path(f2j):
    path = PathRecord("p1", (SourceLocation(f2j.file, 14), SourceLocation(f2j.file, 16)), ())
    assert screen_path(path, f2j) is None
    ok = PathRecord("p2", (SourceLocation(f2j.file, 4), SourceLocation(f2j.file, 14)), ())
    assert screen_path(ok, f2j) is ok


def test_agrees_with_oracle_on_generated_functions(tmp_path):
    rng = random.Random(7)
    checked, mismatches = 0, []
    for seed in range(150):
        gen = loopfree.generate(seed)
        d = tmp_path / f"g{seed}"
        d.mkdir()
        (d / "g.c").write_text(gen.source)
        (f,) = list(index_repository(d))
        lines = gen.statement_lines
        facts, expected = [], []
        for _ in range(12):
            a, b = rng.choice(lines), rng.choice(lines)
            sv, tv = rng.choice(loopfree.VARS), rng.choice(loopfree.VARS)
            facts.append(DataFlowFact(_value(f, sv, a), _value(f, tv, b)))
            if a == b:
                expected.append(loopfree.oracle_defines(gen, a, tv, sv))
            else:
                expected.append(loopfree.oracle_order(gen, a, b) != "cannot")
        got = [v.consistent for v in validate_order(facts, f)]
        checked += len(facts)
        mismatches += [(seed, str(x)) for x, g, e in zip(facts, got, expected) if g != e]
    assert checked >= 1800
    assert mismatches == []


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 19), st.integers(1, 19), st.sampled_from(["json", "type", "msg"])),
                max_size=8))
def test_screening_only_removes(pairs):
    inv, _ = load("nullret")
    f = fn(inv, "field2json")
    facts = tuple(DataFlowFact(_value(f, var, a), _value(f, var, b)) for a, b, var in pairs)
    path = PathRecord("p1", (SourceLocation(f.file, 4),), facts)
    screened = screen_path(path, f)
    assert screened is not None
    assert set(screened.facts) <= set(facts)
    again = screen_path(screened, f)
    assert again.facts == screened.facts


# -- feasibility ---------------------------------------------------------------

def _candidate(tmp_path, **kw):
    mockscripts.nullret(tmp_path, **kw)
    inv, graph = load("nullret")
    gw = Gateway(MockBackend(tmp_path))
    ex = Explorer(inv, graph, gw)
    (cand,) = ex.explore_from_source(find_sources(inv, "npd")[0], "npd").candidates
    return cand, gw, inv


def test_consistent_conditions_are_feasible(tmp_path):
    cand, gw, inv = _candidate(tmp_path)
    verdict = validate_feasibility(cand, gw, inv)
    assert verdict.feasible and verdict.verdict is Verdict.FEASIBLE
    assert verdict.candidate_id == cand.candidate_id


def test_contradiction_is_reported(tmp_path):
    cand, gw, inv = _candidate(tmp_path, contradiction=True)
    verdict = validate_feasibility(cand, gw, inv)
    assert verdict.verdict is Verdict.CONTRADICTION and not verdict.feasible
    assert "repeated" in verdict.explanation


def test_unreadable_verdict_fails_open(tmp_path, caplog):
    cand, gw, inv = _candidate(tmp_path, verdict="Hard to say, it depends.")
    with caplog.at_level(logging.WARNING, logger="flowaudit.validators"):
        verdict = validate_feasibility(cand, gw, inv)
    assert verdict.feasible
    assert any("unreadable" in r.message for r in caplog.records)


class _Truncating:
    def __init__(self, inner):
        self.inner = inner
        self.backend_id = inner.backend_id

    def complete(self, request):
        return replace(self.inner.complete(request), truncated=True)


def test_truncated_verdict_fails_open(tmp_path):
    cand, _, inv = _candidate(tmp_path, contradiction=True)
    gw = Gateway(_Truncating(MockBackend(tmp_path)))
    verdict = validate_feasibility(cand, gw, inv)
    assert verdict.feasible and verdict.explanation == "truncated answer"
