"""Report serialization: canonical JSON, SARIF 2.1.0, and plain text."""

from __future__ import annotations

import datetime as _dt
import json
from pathlib import Path
from typing import Optional

from . import __version__
from .audit import BugReport
from .bugspec import BUG_TYPES
from .errors import UnwritableOutput

REPORT_FORMAT = "flowaudit-report"
SCHEMA_VERSION = 1
SARIF_SCHEMA_URI = "https://json.schemastore.org/sarif-2.1.0.json"

# Keys that carry clock readings; determinism comparisons skip them.
VOLATILE_KEYS = ("generated_at", "run")


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def to_json(reports, ledger) -> str:
    doc = {
        "format": REPORT_FORMAT,
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "flowaudit", "version": __version__},
        "generated_at": _now(),
        "reports": [r.to_dict() for r in reports],
        "ledger": ledger.to_dict(),
        "run": ledger.timing(),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def load_json(text: str) -> tuple[list[BugReport], dict]:
    """Inverse of :func:`to_json`: the reports and the ledger totals."""
    doc = json.loads(text)
    if doc.get("format") != REPORT_FORMAT:
        raise ValueError("not a flowaudit report")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported report schema version {doc.get('schema_version')}")
    return [BugReport.from_dict(r) for r in doc["reports"]], doc["ledger"]


def stable_view(text: str) -> str:
    """A JSON report with the volatile keys removed, for byte comparison."""
    doc = json.loads(text)
    for key in VOLATILE_KEYS:
        doc.pop(key, None)
    return json.dumps(doc, indent=2, sort_keys=True)


def _region(value) -> dict:
    region = {"startLine": value.line}
    if value.location.column:
        region["startColumn"] = value.location.column
    return region


def _physical(value) -> dict:
    return {"physicalLocation": {"artifactLocation": {"uri": value.location.file}, "region": _region(value)}}


def _message(report: BugReport) -> str:
    bug = BUG_TYPES[report.bug]
    if report.sink is not None:
        return f"{bug.name}: {report.source} may reach {report.sink} through {len(report.segments)} function(s)"
    return f"{bug.name}: memory held by {report.source.receiver or report.source.variable} may never be released"


def _flow_locations(report: BugReport) -> list[dict]:
    nodes = [report.chain[0].src] + [f.dst for f in report.chain] if report.chain else [report.source]
    return [
        {"location": {**_physical(v), "message": {"text": f"{v.variable} at line {v.line}"}}}
        for v in nodes
    ]


def to_sarif(reports, ledger) -> str:
    rules = [
        {"id": b.name, "name": b.name, "shortDescription": {"text": f"{b.source_description} reaching {b.sink_description}"}}
        for b in BUG_TYPES.values()
    ]
    results = []
    for r in reports:
        results.append({
            "ruleId": BUG_TYPES[r.bug].name,
            "level": "warning",
            "message": {"text": _message(r)},
            "locations": [_physical(r.sink or r.source)],
            "codeFlows": [{"threadFlows": [{"locations": _flow_locations(r)}]}],
            "partialFingerprints": {"flowauditChain/v1": r.id},
            "properties": {"feasibility": r.feasibility, "inconclusive": list(r.inconclusive)},
        })
    doc = {
        "$schema": SARIF_SCHEMA_URI,
        "version": "2.1.0",
        "runs": [{
            "tool": {"driver": {"name": "flowaudit", "version": __version__, "rules": rules}},
            "results": results,
            "properties": {"ledger": ledger.to_dict()},
        }],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def to_text(reports, ledger) -> str:
    lines = []
    for r in sorted(reports, key=lambda r: (r.location.file, r.location.line, r.bug, r.id)):
        loc = r.location
        lines.append(f"{loc.file}:{loc.line}: {_message(r)}")
        for f in r.chain:
            lines.append(f"    {f.src.variable}@{f.src.location.file}:{f.src.line} -> "
                         f"{f.dst.variable}@{f.dst.location.file}:{f.dst.line}")
        for note in r.inconclusive:
            lines.append(f"    note: {note}")
    if not reports:
        lines.append("no bugs reported")
    lines.append(
        f"{len(reports)} report(s); {ledger.prompt_rounds} prompt(s), "
        f"{ledger.input_tokens} input / {ledger.output_tokens} output tokens, "
        f"cost {ledger.financial_cost} {ledger.rates.currency}"
    )
    return "\n".join(lines) + "\n"


EMITTERS = {"json": to_json, "sarif": to_sarif, "text": to_text}


def emit_report(reports, ledger, fmt: str = "json", output: Optional[str] = None) -> str:
    """Serialize ``reports``; also write to ``output`` when given."""
    try:
        text = EMITTERS[fmt](list(reports), ledger)
    except KeyError:
        raise ValueError(f"unknown format {fmt!r}") from None
    if output is not None:
        try:
            Path(output).write_text(text)
        except OSError as exc:
            raise UnwritableOutput(f"cannot write {output}: {exc}") from exc
    return text
