"""Demand-driven, path-sensitive exploration from bug sources.

Each source starts a breadth-first walk over (function, value) tasks.  A task
is answered by one function-analysis prompt (or by memory), the answer is
screened by the order validator, and the surviving paths either reach sinks,
leave the function through an escape, or end.  Escapes spawn tasks in callees
or callers until the depth bound is hit.
"""

from __future__ import annotations

import hashlib
import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

from .bugspec import BugSpecConfig, BugType, ProgramValue, ReportRule, Role, bug_type, find_sinks
from .errors import AlreadyPresent, BackendUnreachable, OutputTruncated
from .frontend import CallGraph, CallSite, FunctionInventory
from .gateway.parsing import parse_analysis_response
from .gateway.prompts import Decoding, load_few_shots, render_analysis_prompt
from .memory import AgentMemory, Boundary, DataFlowFact, EscapeAnnotation, EscapeKind, PathRecord
from .validators import screen_path

logger = logging.getLogger(__name__)

Segment = tuple  # (function id, PathRecord)


@dataclass(frozen=True)
class ExplorationTask:
    """Analyze ``value`` inside ``function``.

    ``segments`` and ``chain`` record how the value was reached from the
    source.  ``call_stack`` holds the call sites entered through arguments
    and not yet returned from, so a return goes back to the matching call.
    """

    function: str
    value: ProgramValue
    depth: int
    segments: tuple = ()
    chain: tuple[DataFlowFact, ...] = ()
    call_stack: tuple[CallSite, ...] = ()

    @property
    def provenance(self) -> list[tuple[str, str, DataFlowFact]]:
        """(function id, path id, fact) for every fact of the chain so far."""
        owners = {fid: path.path_id for fid, path in self.segments}
        return [(f.src.function, owners.get(f.src.function, ""), f) for f in self.chain]

    def sort_key(self):
        loc = self.value.location
        return (loc.file, loc.line, loc.column, self.value.variable, self.function)


@dataclass(frozen=True)
class Trail:
    """One finished walk: the segments taken, the fact chain, and the sink reached (if any)."""

    source: ProgramValue
    segments: tuple
    chain: tuple[DataFlowFact, ...]
    sink: Optional[ProgramValue]


@dataclass
class BugCandidate:
    bug: BugType
    source: ProgramValue
    segments: tuple
    chain: tuple[DataFlowFact, ...]
    sink: Optional[ProgramValue] = None
    order_validated: bool = True
    feasibility: str = "pending"

    def nodes(self) -> list[ProgramValue]:
        if not self.chain:
            return [self.source]
        return [self.chain[0].src] + [f.dst for f in self.chain]

    def chain_key(self) -> str:
        """Readable identity of the chain; also the feasibility prompt key."""
        key = " -> ".join(f"{v.variable}@{v.location.file}:{v.line}" for v in self.nodes())
        return key if self.sink is not None else key + " -> (no sink)"

    @property
    def candidate_id(self) -> str:
        material = f"{self.bug.key}\0{self.chain_key()}\0{len(self.segments)}"
        return hashlib.sha256(material.encode()).hexdigest()[:16]

    @property
    def terminal(self) -> str:
        return "SinkReached" if self.sink is not None else "NoSinkOnPath"

    def terminal_description(self) -> str:
        if self.sink is not None:
            return f"The value reaches the sink {self.sink} ({self.bug.sink_description})."
        fid, path = self.segments[-1]
        return (f"The value is never passed to {self.bug.sink_description} on path {path.path_id} "
                f"and does not leave the function.")


@dataclass
class ExplorationResult:
    source: ProgramValue
    candidates: list[BugCandidate] = field(default_factory=list)
    inconclusive: list[str] = field(default_factory=list)
    tasks: int = 0


def _chain_within(path: PathRecord, start: ProgramValue, target: ProgramValue) -> Optional[list[DataFlowFact]]:
    """Shortest fact chain inside ``path`` from ``start`` to ``target`` (same points), or None."""
    begin = (start.variable, start.line)
    goal = (target.variable, target.line)
    if begin == goal:
        return []
    prev = {begin: None}
    queue = deque([begin])
    while queue:
        node = queue.popleft()
        for fact in path.facts:
            if (fact.src.variable, fact.src.line) != node:
                continue
            nxt = (fact.dst.variable, fact.dst.line)
            if nxt in prev:
                continue
            prev[nxt] = (node, fact)
            if nxt == goal:
                chain = []
                while prev[nxt] is not None:
                    nxt, f = prev[nxt]
                    chain.append(f)
                return chain[::-1]
            queue.append(nxt)
    return None


class Explorer:
    def __init__(
        self,
        inventory: FunctionInventory,
        graph: CallGraph,
        gateway,
        memory: Optional[AgentMemory] = None,
        *,
        max_depth: int = 4,
        config: Optional[BugSpecConfig] = None,
        abstraction: bool = True,
        validators: bool = True,
        cache: bool = True,
        decoding: Decoding = Decoding(),
        reasks: int = 2,
        strict: bool = False,
    ):
        if max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        self.inventory = inventory
        self.graph = graph
        self.gateway = gateway
        self.memory = memory if memory is not None else AgentMemory()
        self.max_depth = max_depth
        self.config = config or BugSpecConfig.load()
        self.abstraction = abstraction
        self.validators = validators
        self.cache = cache
        self.decoding = decoding
        self.reasks = reasks
        self.strict = strict
        self._sinks: dict = {}
        self._shots: dict = {}

    # -- sinks -----------------------------------------------------------------

    def sink_index(self, bug: BugType) -> dict:
        if bug.key not in self._sinks:
            self._sinks[bug.key] = {
                (s.function, s.variable, s.line): s for s in find_sinks(self.inventory, bug, self.config)
            }
        return self._sinks[bug.key]

    def _sink_at(self, bug: BugType, value: ProgramValue) -> Optional[ProgramValue]:
        return self.sink_index(bug).get((value.function, value.variable, value.line))

    # -- one function ----------------------------------------------------------

    def analyze_function(self, function_id: str, value: ProgramValue, bug, source: Optional[str] = None) -> list[PathRecord]:
        """Path records for ``value`` in ``function_id``, from memory when possible."""
        bug = bug_type(bug)
        if self.cache:
            cached = self.memory.lookup(function_id, value)
            if cached is not None:
                return cached
            if not self.memory.claim(function_id, value):
                return self.memory.lookup(function_id, value) or []
        try:
            records = self._ask(function_id, value, bug, source)
        except BaseException:
            if self.cache:
                self.memory.release(function_id, value)
            raise
        if records is None:
            if self.cache:
                self.memory.release(function_id, value)
            return []
        try:
            self.memory.store(function_id, value, records)
        except AlreadyPresent:
            pass
        return records

    def _ask(self, function_id: str, value: ProgramValue, bug: BugType, source: Optional[str]) -> Optional[list[PathRecord]]:
        fn = self.inventory.get(function_id)
        if bug.key not in self._shots:
            self._shots[bug.key] = load_few_shots(bug)
        request = render_analysis_prompt(fn, value, bug, self._shots[bug.key],
                                         abstraction=self.abstraction, decoding=self.decoding)
        parsed = None
        for attempt in range(self.reasks + 1):
            try:
                response = self.gateway.query(request, source=source)
            except OutputTruncated as exc:
                logger.warning("analysis of %s in %s truncated: %s", value, fn.name, exc)
                note = "Your previous answer was cut off. Answer more briefly, in the required format."
            except BackendUnreachable as exc:
                logger.warning("analysis of %s in %s failed: %s", value, fn.name, exc)
                return None
            else:
                parsed = parse_analysis_response(response.raw_text, fn, value, strict=self.strict)
                if not parsed.malformed:
                    break
                note = ("Your previous answer could not be used: " + "; ".join(parsed.parse_errors[:5])
                        + ". Answer again, strictly in the required format.")
            if attempt < self.reasks:
                request = request.retry(note)
        if parsed is None:
            logger.warning("analysis of %s in %s degraded to no paths", value, fn.name)
            return None
        if parsed.malformed:
            logger.warning("analysis of %s in %s still malformed after %d re-asks; keeping %d usable paths",
                           value, fn.name, self.reasks, len(parsed.paths))
        paths = parsed.paths
        if self.validators:
            paths = [p for p in (screen_path(p, fn) for p in paths) if p is not None]
        return paths

    # -- crossing functions ------------------------------------------------------

    def propagate_across_boundary(self, escape: EscapeAnnotation, depth: int,
                                  call_stack: tuple = ()) -> list[ExplorationTask]:
        """Tasks in the functions an escape leads to, each carrying its boundary fact as ``chain``."""
        if depth + 1 > self.max_depth:
            return []
        tasks = []
        if escape.kind is EscapeKind.TO_CALLEE_ARGUMENT:
            site = escape.call_site
            callees = self.graph.callees(site)
            if not callees:
                logger.info("unresolved boundary: %s at %s", site.callee_name, site.location)
            for cid in callees:
                callee = self.inventory.get(cid)
                if escape.argument_index >= len(callee.parameters):
                    logger.info("no parameter %d in %s", escape.argument_index, callee.name)
                    continue
                param = callee.parameters[escape.argument_index]
                tracked = ProgramValue(param.name, param.location, cid, Role.PARAMETER)
                link = DataFlowFact(escape.value, tracked, Boundary.ARGUMENT)
                tasks.append(ExplorationTask(cid, tracked, depth + 1, chain=(link,), call_stack=call_stack + (site,)))
        elif escape.kind is EscapeKind.TO_CALLER_RETURN:
            sites = self.graph.callers(escape.value.function)
            if call_stack:
                # return to the call that brought the value here
                sites = [s for s in sites if s == call_stack[-1]]
            for site in sites:
                if not site.receiver_assignment:
                    logger.info("return value of %s discarded at %s", site.callee_name, site.location)
                    continue
                tracked = ProgramValue(site.receiver_assignment, site.receiver_location, site.caller, Role.RETURN_VALUE)
                link = DataFlowFact(escape.value, tracked, Boundary.RETURN)
                tasks.append(ExplorationTask(site.caller, tracked, depth + 1, chain=(link,), call_stack=call_stack[:-1]))
        return tasks

    def _successors(self, task: ExplorationTask, path: PathRecord, bug: BugType,
                    result: ExplorationResult) -> list[ExplorationTask]:
        out = []
        for escape in path.escapes:
            lead = _chain_within(path, task.value, escape.value)
            if lead is None:
                logger.debug("escape %s not reachable from %s", escape.value, task.value)
                continue
            if escape.kind is EscapeKind.TO_GLOBAL:
                result.inconclusive.append(f"{escape.value} escapes to a global in {task.function}")
                continue
            nxt = self.propagate_across_boundary(escape, task.depth, task.call_stack)
            if not nxt:
                reason = ("depth bound reached" if task.depth + 1 > self.max_depth
                          else "no resolvable target")
                result.inconclusive.append(f"{escape.value} in {task.function}: {reason}")
            for t in nxt:
                out.append(replace(
                    t,
                    segments=task.segments + ((task.function, path),),
                    chain=task.chain + tuple(lead) + t.chain,
                ))
        return out

    # -- one source ------------------------------------------------------------

    def explore_from_source(self, source: ProgramValue, bug) -> ExplorationResult:
        bug = bug_type(bug)
        result = ExplorationResult(source)
        trails: list[Trail] = []
        label = f"{source.variable}@{source.location.file}:{source.line}"
        level = [ExplorationTask(source.function, source, 1)]
        seen = set()
        while level:
            following = []
            for task in sorted(level, key=ExplorationTask.sort_key):
                ident = (task.function, task.value, task.chain)
                if ident in seen:
                    continue
                seen.add(ident)
                result.tasks += 1
                for path in self.analyze_function(task.function, task.value, bug, source=label):
                    trails.extend(self._trails(task, path, bug, source))
                    if bug.report_rule is ReportRule.REPORT_IF_NO_SINK_REACHED and self._released(task, path, bug):
                        continue
                    following.extend(self._successors(task, path, bug, result))
            level = following
        result.candidates = self.assemble_candidates(trails, bug)
        return result

    def _released(self, task: ExplorationTask, path: PathRecord, bug: BugType) -> bool:
        for fact in path.facts:
            if self._sink_at(bug, fact.dst) is not None and _chain_within(path, task.value, fact.dst) is not None:
                return True
        return False

    def _trails(self, task: ExplorationTask, path: PathRecord, bug: BugType, source: ProgramValue) -> list[Trail]:
        segments = task.segments + ((task.function, path),)
        if bug.report_rule is ReportRule.REPORT_IF_SINK_REACHED:
            found = []
            for fact in path.facts:
                sink = self._sink_at(bug, fact.dst)
                if sink is None:
                    continue
                lead = _chain_within(path, task.value, fact.dst)
                if lead is None:
                    continue
                found.append(Trail(source, segments, task.chain + tuple(lead), sink))
            return found
        if self._released(task, path, bug) or path.escapes:
            return []
        return [Trail(source, segments, task.chain, None)]

    def assemble_candidates(self, trails, bug) -> list[BugCandidate]:
        """Turn finished trails into candidates under the bug type's report rule, one per chain."""
        bug = bug_type(bug)
        out: dict[str, BugCandidate] = {}
        for trail in trails:
            if bug.report_rule is ReportRule.REPORT_IF_SINK_REACHED:
                if trail.sink is None:
                    continue
                if bug.key == "uaf" and not trail.chain:
                    continue
            elif trail.sink is not None:
                continue
            cand = BugCandidate(bug, trail.source, trail.segments, trail.chain, trail.sink,
                                order_validated=self.validators)
            out.setdefault(cand.chain_key(), cand)
        return list(out.values())

    def explore(self, sources, bug, parallel: int = 1) -> list[ExplorationResult]:
        """Explore several sources; results come back in source order."""
        sources = list(sources)
        if parallel <= 1:
            return [self.explore_from_source(s, bug) for s in sources]
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(lambda s: self.explore_from_source(s, bug), sources))
