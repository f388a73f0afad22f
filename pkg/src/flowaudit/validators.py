"""Hallucination screens for model output.

``validate_order`` is symbolic: a fact whose direction contradicts the
syntactic control-flow order of its function is rejected before it reaches
memory.  ``validate_feasibility`` asks the model whether the branch
conditions of a cross-function candidate can hold together.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from typing import Optional

from .cfg import Order, statement_precedes
from .errors import LocationOutsideFunction, OutputTruncated
from .frontend import FunctionRecord, line_defines
from .gateway.parsing import Verdict, parse_verdict
from .gateway.prompts import Decoding, render_feasibility_prompt
from .memory import DataFlowFact, PathRecord

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OrderVerdictedFact:
    fact: DataFlowFact
    consistent: bool
    reason: str = ""


def _check(fact: DataFlowFact, function: FunctionRecord) -> OrderVerdictedFact:
    for value in (fact.src, fact.dst):
        if value.function != function.id:
            raise LocationOutsideFunction(f"{value} belongs to another function than {function.name}")
    a, b = fact.src.location, fact.dst.location
    if a.line == b.line:
        if line_defines(function, a.line, fact.dst.variable, fact.src.variable):
            return OrderVerdictedFact(fact, True)
        return OrderVerdictedFact(fact, False, f"line {a.line} does not define {fact.dst.variable} from {fact.src.variable}")
    verdict = statement_precedes(function, a, b)
    if verdict.possible:
        return OrderVerdictedFact(fact, True)
    if verdict is Order.UNKNOWN:
        return OrderVerdictedFact(fact, False, f"ordering of lines {a.line} and {b.line} is unknown")
    return OrderVerdictedFact(fact, False, f"line {a.line} cannot execute before line {b.line}")


def validate_order(facts, function: FunctionRecord, path: Optional[PathRecord] = None) -> list[OrderVerdictedFact]:
    """Verdict per fact, in input order.  ``path`` is accepted for context only."""
    return [_check(f, function) for f in facts]


def path_is_ordered(path: PathRecord, function: FunctionRecord) -> bool:
    """False when two consecutive listed statements cannot run in that order."""
    for a, b in zip(path.statements, path.statements[1:]):
        if a.line != b.line and statement_precedes(function, a, b) is Order.CANNOT_PRECEDE:
            return False
    return True


def screen_path(path: PathRecord, function: FunctionRecord) -> Optional[PathRecord]:
    """Drop order-violating facts; drop the whole path if its statement order is impossible."""
    if not path_is_ordered(path, function):
        logger.info("dropping path %s of %s: statement order is impossible", path.path_id, function.name)
        return None
    verdicts = validate_order(path.facts, function, path)
    for v in verdicts:
        if not v.consistent:
            logger.info("dropping fact %s in %s: %s", v.fact, function.name, v.reason)
    kept = tuple(v.fact for v in verdicts if v.consistent)
    if len(kept) == len(path.facts):
        return path
    return PathRecord(path.path_id, path.statements, kept, path.escapes, path.condition_notes)


@dataclass(frozen=True)
class FeasibilityVerdict:
    candidate_id: str
    verdict: Verdict
    explanation: str = ""
    model_response_id: str = ""

    @property
    def feasible(self) -> bool:
        return self.verdict is Verdict.FEASIBLE


def validate_feasibility(candidate, gateway, inventory, *, decoding: Decoding = Decoding(),
                         source: Optional[str] = None) -> FeasibilityVerdict:
    """Ask the model for contradictions among the candidate's path conditions.

    Unreadable verdicts (including truncated answers) count as feasible.
    """
    request = render_feasibility_prompt(candidate, inventory, decoding=decoding)
    try:
        response = gateway.query(request, source=source)
    except OutputTruncated as exc:
        logger.warning("feasibility answer for %s truncated; keeping the candidate: %s", candidate.candidate_id, exc)
        return FeasibilityVerdict(candidate.candidate_id, Verdict.FEASIBLE, "truncated answer", request.fingerprint)
    verdict, text = parse_verdict(response.raw_text)
    if verdict is None:
        logger.warning("unreadable feasibility verdict for %s; keeping the candidate", candidate.candidate_id)
        verdict = Verdict.FEASIBLE
    rid = hashlib.sha256(f"{response.fingerprint}\0{response.raw_text}".encode()).hexdigest()[:16]
    return FeasibilityVerdict(candidate.candidate_id, verdict, text, rid)
