"""Memory leak: a buffer freed on one branch but not on the other.

Leaks are reported when the allocation reaches no free on some path and
never leaves the function.  The second half reruns the same question on a
version that frees on both branches, and nothing is reported.

    python3 demos/leak_on_early_return.py
"""

import tempfile
from pathlib import Path

from flowaudit import AuditConfig, index_repository, run_audit
from flowaudit.gateway import MockScript
from flowaudit.report import to_text

LEAKY = """\
int load(int n)
{
    char *buf = malloc(n);
    if (n < 0)
        return -1;
    fill(buf, n);
    free(buf);
    return 0;
}
"""

TIDY = """\
int load(int n)
{
    char *buf = malloc(n);
    if (n < 0) {
        free(buf);
        return -1;
    }
    fill(buf, n);
    free(buf);
    return 0;
}
"""

ANSWERS = {
    "leaky": ("PATH 1\nSTATEMENTS: 3, 4, 5\nCONDITION: n < 0\nEND\n"
              "PATH 2\nSTATEMENTS: 3, 4, 6, 7, 8\nFACT: buf@3 -> buf@6\nFACT: buf@3 -> buf@7\nEND\n"),
    "tidy": ("PATH 1\nSTATEMENTS: 3, 4, 5, 6\nFACT: buf@3 -> buf@5\nCONDITION: n < 0\nEND\n"
             "PATH 2\nSTATEMENTS: 3, 4, 8, 9, 10\nFACT: buf@3 -> buf@8\nFACT: buf@3 -> buf@9\nEND\n"),
}


def audit(tmp: Path, name: str, text: str):
    root, mock = tmp / name, tmp / f"{name}-mock"
    root.mkdir()
    (root / "load.c").write_text(text)
    (load,) = index_repository(root).by_name("load")
    script = MockScript(mock)
    script.analysis("mlk", load.id, "buf", load.file, 3, ANSWERS[name], 400, 50)
    script.feasibility("mlk", load.id, "buf@load.c:3 -> (no sink)", "FEASIBLE\nn < 0 is reachable.", 350, 12)
    return run_audit(AuditConfig(str(root), bug_types="mlk", mock_dir=str(mock)))


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        for name, text in (("leaky", LEAKY), ("tidy", TIDY)):
            reports, ledger = audit(Path(tmp), name, text)
            print(f"== {name}")
            print(to_text(reports, ledger))


if __name__ == "__main__":
    main()
