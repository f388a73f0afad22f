"""Scripted model answers for the fixture repositories."""

from pathlib import Path

from flowaudit import build_call_graph, index_repository
from flowaudit.gateway import MockScript

FIXTURES = Path(__file__).parent / "fixtures"

FIELD2JSON_ANSWER = """\
PATH 1
STATEMENTS: 4, 5, 13, 14
FACT: NULL@4 -> json@4
FACT: json@4 -> json@14
ESCAPE: RETURN json@14
CONDITION: repeated == false
END
PATH 2
STATEMENTS: 4, 5, 6, 13, 16, 18
FACT: NULL@4 -> json@4
CONDITION: repeated == true; json_fill_array succeeds
END
PATH 3
STATEMENTS: 4, 5, 6, 13, 16, 17
FACT: NULL@4 -> json@4
CONDITION: repeated == true; json_fill_array fails
END
"""

PARSE_MSG_ANSWER = """\
PATH 1
STATEMENTS: 7, 8, 9
FACT: field_json@7 -> field_json@8
CONDITION: msg != NULL
END
"""

PARSE_MSG_CONTRADICTING = """\
PATH 1
STATEMENTS: 7, 8, 9
FACT: field_json@7 -> field_json@8
CONDITION: msg != NULL; repeated == true
END
"""

NULLRET_CHAIN = ("NULL@src/field_json.c:4 -> json@src/field_json.c:4 -> json@src/field_json.c:14"
              " -> field_json@src/parse_msg.c:7 -> field_json@src/parse_msg.c:8")

# scripted (input, output) token counts per response, in query order
NULLRET_TOKENS = [(1200, 180), (700, 60), (900, 40)]


def load(name):
    inv = index_repository(FIXTURES / name)
    return inv, build_call_graph(inv)


def fn(inv, name):
    (record,) = inv.by_name(name)
    return record


def nullret(directory, *, contradiction=False, verdict=None):
    """Mock directory for the two-function NPD example.

    Returns the number of scripted responses.
    """
    inv, _ = load("nullret")
    ms = MockScript(directory)
    f2j, pm = fn(inv, "field2json"), fn(inv, "parse_msg")
    (i1, o1), (i2, o2), (i3, o3) = NULLRET_TOKENS
    ms.analysis("npd", f2j.id, "NULL", f2j.file, 4, FIELD2JSON_ANSWER, i1, o1)
    ms.analysis("npd", pm.id, "field_json", pm.file, 7,
                PARSE_MSG_CONTRADICTING if contradiction else PARSE_MSG_ANSWER, i2, o2)
    if verdict is None:
        verdict = ("CONTRADICTION\nfield2json returns json only when repeated is false, "
                   "but the caller path assumes repeated is true." if contradiction
                   else "FEASIBLE\nThe conditions are independent.")
    ms.feasibility("npd", f2j.id, NULLRET_CHAIN, verdict, i3, o3)
    return ms.count


def chain6(directory):
    inv, _ = load("chain6")
    ms = MockScript(directory)
    f1 = fn(inv, "f1")
    ms.analysis("npd", f1.id, "NULL", f1.file, 28,
                "PATH 1\nSTATEMENTS: 28, 29\nFACT: NULL@28 -> p@28\nFACT: p@28 -> p@29\n"
                "ESCAPE: ARGUMENT p@29 CALL f2 INDEX 0\nEND\n", 300, 30)
    for k in (2, 3, 4, 5):
        f = fn(inv, f"f{k}")
        first = f.span[0]
        ms.analysis("npd", f.id, f"p{k}", f.file, first,
                    f"PATH 1\nSTATEMENTS: {first}, {first + 2}\nFACT: p{k}@{first} -> p{k}@{first + 2}\n"
                    f"ESCAPE: ARGUMENT p{k}@{first + 2} CALL f{k + 1} INDEX 0\nEND\n", 200, 20)
    f6 = fn(inv, "f6")
    ms.analysis("npd", f6.id, "p6", f6.file, 1, "PATH 1\nSTATEMENTS: 1, 3\nFACT: p6@1 -> p6@3\nEND\n", 150, 15)
    key = " -> ".join(["NULL@fwd.c:28", "p@fwd.c:28", "p@fwd.c:29", "p2@fwd.c:21", "p2@fwd.c:23",
                       "p3@fwd.c:16", "p3@fwd.c:18", "p4@fwd.c:11", "p4@fwd.c:13", "p5@fwd.c:6",
                       "p5@fwd.c:8", "p6@fwd.c:1", "p6@fwd.c:3"])
    ms.feasibility("npd", f1.id, key, "FEASIBLE\nNo conditions.", 400, 10)
    return ms.count


def shared(directory):
    inv, _ = load("shared")
    ms = MockScript(directory)
    for name, var, line in (("first", "a", 8), ("second", "b", 14)):
        f = fn(inv, name)
        ms.analysis("npd", f.id, "NULL", f.file, line,
                    f"PATH 1\nSTATEMENTS: {line}, {line + 1}\nFACT: NULL@{line} -> {var}@{line}\n"
                    f"FACT: {var}@{line} -> {var}@{line + 1}\nESCAPE: ARGUMENT {var}@{line + 1} CALL consume INDEX 0\nEND\n",
                    250, 25)
        key = (f"NULL@use.c:{line} -> {var}@use.c:{line} -> {var}@use.c:{line + 1} -> q@use.c:1 -> q@use.c:3")
        ms.feasibility("npd", f.id, key, "FEASIBLE", 300, 5)
    c = fn(inv, "consume")
    ms.analysis("npd", c.id, "q", c.file, 1, "PATH 1\nSTATEMENTS: 1, 3\nFACT: q@1 -> q@3\nEND\n", 120, 12)
    return ms.count


def mlk(directory, variant):
    """``variant`` is "leak" (early return without free) or "freed" (free on both branches)."""
    inv, _ = load(f"mlk_{variant}")
    ms = MockScript(directory)
    f = fn(inv, "load")
    if variant == "leak":
        answer = ("PATH 1\nSTATEMENTS: 3, 4, 5\nCONDITION: n < 0\nEND\n"
                  "PATH 2\nSTATEMENTS: 3, 4, 6, 7, 8\nFACT: buf@3 -> buf@6\nFACT: buf@3 -> buf@7\n"
                  "CONDITION: n >= 0\nEND\n")
    else:
        answer = ("PATH 1\nSTATEMENTS: 3, 4, 5, 6\nFACT: buf@3 -> buf@5\nCONDITION: n < 0\nEND\n"
                  "PATH 2\nSTATEMENTS: 3, 4, 8, 9, 10\nFACT: buf@3 -> buf@8\nFACT: buf@3 -> buf@9\n"
                  "CONDITION: n >= 0\nEND\n")
    ms.analysis("mlk", f.id, "buf", f.file, 3, answer, 400, 50)
    ms.feasibility("mlk", f.id, "buf@load.c:3 -> (no sink)", "FEASIBLE\nn < 0 is satisfiable.", 350, 12)
    return ms.count


def uaf(directory):
    inv, _ = load("uaf")
    ms = MockScript(directory)
    f = fn(inv, "drop")
    ms.analysis("uaf", f.id, "n", f.file, 7, "PATH 1\nSTATEMENTS: 7, 8\nFACT: n@7 -> n@8\nEND\n", 200, 20)
    ms.feasibility("uaf", f.id, "n@drop.c:7 -> n@drop.c:8", "FEASIBLE", 210, 5)
    return ms.count


# name -> (fixture directory, bug types, script builder)
SCENARIOS = {
    "nullret": ("nullret", ("npd",), nullret),
    "nullret_contradiction": ("nullret", ("npd",), lambda d: nullret(d, contradiction=True)),
    "chain6": ("chain6", ("npd",), chain6),
    "shared": ("shared", ("npd",), shared),
    "mlk_leak": ("mlk_leak", ("mlk",), lambda d: mlk(d, "leak")),
    "mlk_freed": ("mlk_freed", ("mlk",), lambda d: mlk(d, "freed")),
    "uaf": ("uaf", ("uaf",), uaf),
}
