"""What the three ablation switches change.

* ``no_cache``: two callers hand NULL to the same callee.  With memory the
  callee is analyzed once; without it, once per caller.
* ``no_validators``: the caller's path assumes ``repeated`` is true while the
  callee only returns NULL when it is false.  The feasibility check drops
  the report; switching validators off keeps it.
* ``no_abstraction``: the analysis prompt loses one instruction step.

    python3 demos/ablation_switches.py
"""

import difflib
import tempfile
from pathlib import Path

from flowaudit import AuditConfig, find_sources, index_repository, run_audit
from flowaudit.gateway import MockScript, render_analysis_prompt

import cross_function_npd as npd

SHARED = """\
int consume(int *q)
{
    return *q;
}
int first(void)
{
    int *a;
    a = NULL;
    return consume(a);
}
int second(void)
{
    int *b;
    b = NULL;
    return consume(b);
}
"""


def shared_callee(tmp: Path) -> None:
    root, mock = tmp / "shared", tmp / "shared-mock"
    root.mkdir()
    (root / "use.c").write_text(SHARED)
    inv = index_repository(root)
    script = MockScript(mock)
    for name, var, line in (("first", "a", 8), ("second", "b", 14)):
        (f,) = inv.by_name(name)
        script.analysis("npd", f.id, "NULL", f.file, line,
                        f"PATH 1\nSTATEMENTS: {line}, {line + 1}\nFACT: NULL@{line} -> {var}@{line}\n"
                        f"FACT: {var}@{line} -> {var}@{line + 1}\n"
                        f"ESCAPE: ARGUMENT {var}@{line + 1} CALL consume INDEX 0\nEND\n", 250, 25)
        chain = f"NULL@use.c:{line} -> {var}@use.c:{line} -> {var}@use.c:{line + 1} -> q@use.c:1 -> q@use.c:3"
        script.feasibility("npd", f.id, chain, "FEASIBLE", 300, 5)
    (c,) = inv.by_name("consume")
    script.analysis("npd", c.id, "q", c.file, 1, "PATH 1\nSTATEMENTS: 1, 3\nFACT: q@1 -> q@3\nEND\n", 120, 12)
    for no_cache in (False, True):
        reports, ledger = run_audit(AuditConfig(str(root), mock_dir=str(mock), no_cache=no_cache))
        print(f"no_cache={no_cache}: {len(reports)} reports, {ledger.prompt_rounds} prompts, "
              f"{ledger.input_tokens} input tokens")


def contradiction(tmp: Path) -> None:
    root, mock = tmp / "contra", tmp / "contra-mock"
    npd.build(root, mock)
    inv = index_repository(root)
    (f2j,) = inv.by_name("field2json")
    (pm,) = inv.by_name("parse_msg")
    script = MockScript(mock)
    script.analysis("npd", pm.id, "field_json", pm.file, 7,
                    npd.CALLER_ANSWER.replace("msg != NULL", "msg != NULL; repeated == true"), 700, 60)
    script.feasibility("npd", f2j.id, npd.CHAIN,
                       "CONTRADICTION\nThe callee returns NULL only when repeated is false.", 900, 40)
    for off in (False, True):
        reports, _ = run_audit(AuditConfig(str(root), mock_dir=str(mock), no_validators=off))
        print(f"no_validators={off}: {len(reports)} reports")


def abstraction(tmp: Path) -> None:
    root = tmp / "prompt"
    npd.build(root, tmp / "prompt-mock")
    inv = index_repository(root)
    (src,) = find_sources(inv, "npd")
    fn = inv.get(src.function)
    full = render_analysis_prompt(fn, src, "npd").rendered_text.splitlines()
    bare = render_analysis_prompt(fn, src, "npd", abstraction=False).rendered_text.splitlines()
    print("\n".join(line for line in difflib.unified_diff(full, bare, "full", "no_abstraction", n=0, lineterm="")))


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        print("== memory")
        shared_callee(tmp)
        print("\n== feasibility check")
        contradiction(tmp)
        print("\n== abstraction step")
        abstraction(tmp)


if __name__ == "__main__":
    main()
