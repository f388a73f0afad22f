"""Parsing model answers into path records and verdicts."""

from __future__ import annotations

import enum
import logging
import re
from dataclasses import dataclass, field
from typing import Optional

from ..bugspec import ProgramValue, Role
from ..frontend import FunctionRecord, SourceLocation, locate, token_pattern
from ..memory import DataFlowFact, EscapeAnnotation, EscapeKind, PathRecord

logger = logging.getLogger(__name__)

_VALUE = r"(?P<{0}>[^@\s][^@]*?)@(?P<{0}_line>\d+)"
_FACT_RE = re.compile(rf"^{_VALUE.format('a')}\s*(?:->|=>|↪)\s*{_VALUE.format('b')}$")
_VALUE_RE = re.compile(rf"^{_VALUE.format('v')}$")
_ARG_RE = re.compile(
    rf"^ARGUMENT\s+{_VALUE.format('v')}\s+CALL\s+(?P<callee>[A-Za-z_]\w*)(?:\s+INDEX\s+(?P<index>\d+))?$",
    re.IGNORECASE,
)
_TAG_RE = re.compile(r"^[-*\s]*(PATH|STATEMENTS|FACT|ESCAPE|CONDITIONS?|END)\b\s*:?\s*(.*)$", re.IGNORECASE)


@dataclass
class AnalysisParse:
    paths: list[PathRecord] = field(default_factory=list)
    parse_errors: list[str] = field(default_factory=list)
    no_paths: bool = False

    @property
    def malformed(self) -> bool:
        """Nothing usable came back: no path survived and the answer was not NO PATHS."""
        return not self.paths and not self.no_paths and bool(self.parse_errors)


class _Block:
    def __init__(self, ordinal: int):
        self.ordinal = ordinal
        self.statements: list[int] = []
        self.facts: list[tuple[str, int, str, int]] = []
        self.escapes: list[str] = []
        self.conditions: list[str] = []


def _split_blocks(raw: str, errors: list[str]) -> tuple[list[_Block], bool]:
    blocks: list[_Block] = []
    cur: Optional[_Block] = None
    no_paths = False
    for lineno, line in enumerate(raw.splitlines(), 1):
        line = line.strip().strip("`")
        if not line:
            continue
        if line.upper().rstrip(".") == "NO PATHS":
            no_paths = True
            continue
        m = _TAG_RE.match(line)
        if m is None:
            continue
        tag, rest = m.group(1).upper(), m.group(2).strip()
        if tag == "PATH":
            cur = _Block(len(blocks) + 1)
            blocks.append(cur)
            continue
        if tag == "END":
            cur = None
            continue
        if cur is None:
            errors.append(f"answer line {lineno}: {tag} outside a PATH block")
            continue
        if tag == "STATEMENTS":
            for tok in re.split(r"[,\s]+", rest):
                tok = tok.strip().lstrip("sS")
                if tok.isdigit():
                    cur.statements.append(int(tok))
                elif tok:
                    errors.append(f"path {cur.ordinal}: bad statement line {tok!r}")
        elif tag == "FACT":
            fm = _FACT_RE.match(rest)
            if fm is None:
                errors.append(f"path {cur.ordinal}: malformed fact {rest!r}")
            else:
                cur.facts.append((fm["a"].strip(), int(fm["a_line"]), fm["b"].strip(), int(fm["b_line"])))
        elif tag == "ESCAPE":
            cur.escapes.append(rest)
        else:
            cur.conditions.append(rest)
    return blocks, no_paths


class _Resolver:
    def __init__(self, function: FunctionRecord, tracked: Optional[ProgramValue]):
        self.function = function
        self.tracked = tracked

    def value(self, variable: str, line: int, where: str, errors: list[str]) -> Optional[ProgramValue]:
        fn = self.function
        if not fn.contains_line(line):
            errors.append(f"{where}: line {line} is outside {fn.name} ({fn.span[0]}-{fn.span[1]})")
            return None
        if self.tracked is not None and self.tracked.variable == variable and self.tracked.line == line:
            return self.tracked
        loc = locate(fn, variable, line)
        if loc is None:
            errors.append(f"{where}: `{variable}` does not occur on line {line}")
            return None
        role = Role.PARAMETER if any(p.name == variable and p.location.line == line for p in fn.parameters) else Role.INTERMEDIATE
        return ProgramValue(variable, loc, fn.id, role)


def _escape(text: str, res: _Resolver, where: str, errors: list[str]) -> list[EscapeAnnotation]:
    fn = res.function
    head, _, rest = text.partition(" ")
    head = head.upper()
    if head in ("RETURN", "GLOBAL"):
        m = _VALUE_RE.match(rest.strip())
        if m is None:
            errors.append(f"{where}: malformed escape {text!r}")
            return []
        value = res.value(m["v"].strip(), int(m["v_line"]), where, errors)
        if value is None:
            return []
        if head == "RETURN":
            if not token_pattern("return").search(fn.line_text(value.line)):
                errors.append(f"{where}: line {value.line} is not a return statement")
                return []
            return [EscapeAnnotation(EscapeKind.TO_CALLER_RETURN, value)]
        return [EscapeAnnotation(EscapeKind.TO_GLOBAL, value)]
    if head == "ARGUMENT":
        m = _ARG_RE.match(text.strip())
        if m is None:
            errors.append(f"{where}: malformed escape {text!r}")
            return []
        value = res.value(m["v"].strip(), int(m["v_line"]), where, errors)
        if value is None:
            return []
        sites = [
            s for s in fn.call_sites
            if s.location.line <= value.line <= _site_last_line(s) and s.callee_name == m["callee"]
        ]
        if not sites:
            errors.append(f"{where}: no call to {m['callee']} on line {value.line}")
            return []
        pat = token_pattern(value.variable)
        out = []
        for site in sites:
            if m["index"] is not None:
                indices = [int(m["index"])]
            else:
                indices = [i for i, arg in enumerate(site.arguments) if pat.search(arg)]
            for idx in indices:
                if idx >= len(site.arguments) or not pat.search(site.arguments[idx]):
                    errors.append(f"{where}: argument {idx} of {m['callee']} does not carry `{value.variable}`")
                    continue
                out.append(EscapeAnnotation(EscapeKind.TO_CALLEE_ARGUMENT, value, site, idx))
        return out
    errors.append(f"{where}: unknown escape kind {text!r}")
    return []


def _site_last_line(site) -> int:
    # arguments may continue over several lines
    return site.location.line + sum(a.count("\n") for a in site.arguments)


def parse_analysis_response(
    raw: str,
    function: FunctionRecord,
    tracked: Optional[ProgramValue] = None,
    *,
    strict: bool = False,
) -> AnalysisParse:
    """Extract path records from an analysis answer; never raises.

    Facts, escapes and statement lines that cannot be grounded in
    ``function`` are dropped and reported in ``parse_errors``.
    """
    result = AnalysisParse()
    errors = result.parse_errors
    if not raw or not raw.strip():
        errors.append("empty response")
        return result
    blocks, result.no_paths = _split_blocks(raw, errors)
    if not blocks and not result.no_paths:
        errors.append("no PATH blocks found")
        return result

    res = _Resolver(function, tracked)
    for block in blocks:
        where = f"path {block.ordinal}"
        facts = []
        for a, al, b, bl in block.facts:
            src = res.value(a, al, where, errors)
            dst = res.value(b, bl, where, errors)
            if src is not None and dst is not None:
                facts.append(DataFlowFact(src, dst))
        escapes = []
        for text in block.escapes:
            escapes.extend(_escape(text, res, where, errors))

        lines = []
        for ln in block.statements:
            if function.contains_line(ln):
                if ln not in lines:
                    lines.append(ln)
            else:
                errors.append(f"{where}: statement line {ln} is outside {function.name}")
        mentioned = sorted(
            {f.src.line for f in facts} | {f.dst.line for f in facts} | {e.value.line for e in escapes}
        )
        missing = [ln for ln in mentioned if ln not in lines]
        if missing:
            ascending = lines == sorted(lines)
            lines.extend(missing)
            if ascending:
                lines.sort()
        if not lines and tracked is not None:
            lines = [tracked.line]
        if not lines:
            errors.append(f"{where}: no statements")
            continue
        statements = tuple(SourceLocation(function.file, ln) for ln in lines)
        result.paths.append(
            PathRecord(
                path_id=f"p{block.ordinal}",
                statements=statements,
                facts=tuple(dict.fromkeys(facts)),
                escapes=tuple(dict.fromkeys(escapes)),
                condition_notes="; ".join(c for c in block.conditions if c),
            )
        )
    if strict and errors:
        result.paths = []
    for err in errors:
        logger.debug("analysis of %s: %s", function.name, err)
    return result


class Verdict(enum.Enum):
    FEASIBLE = "Feasible"
    CONTRADICTION = "Contradiction"


_VERDICT_RE = re.compile(r"^[\s*#>`\"'-]*(FEASIBLE|CONTRADICTION|INFEASIBLE)\b", re.IGNORECASE)


def parse_verdict(raw: str) -> tuple[Optional[Verdict], str]:
    """Read the verdict token from the first non-empty line; None when absent."""
    lines = [ln for ln in (raw or "").splitlines() if ln.strip()]
    if not lines:
        return None, ""
    m = _VERDICT_RE.match(lines[0])
    if m is None:
        return None, "\n".join(lines).strip()
    token = m.group(1).upper()
    rest = (lines[0][m.end():].strip(" :.-") + "\n" + "\n".join(lines[1:])).strip()
    verdict = Verdict.FEASIBLE if token == "FEASIBLE" else Verdict.CONTRADICTION
    return verdict, rest
