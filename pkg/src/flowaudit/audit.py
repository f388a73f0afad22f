"""End-to-end audit: index, build the call graph, explore every source, screen, report."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .bugspec import BUG_TYPES, BugSpecConfig, ProgramValue, bug_type, find_sources
from .errors import BackendUnreachable, ConfigInvalid, NoSupportedFiles
from .explorer import BugCandidate, Explorer
from .frontend import CallGraph, FunctionInventory, SourceLocation, build_call_graph, index_repository, token_pattern
from .gateway import Decoding, Gateway, Rates, RunLedger, backend_from_options
from .memory import AgentMemory, Boundary, DataFlowFact
from .validators import validate_feasibility

logger = logging.getLogger(__name__)

FORMATS = ("json", "sarif", "text")


@dataclass
class AuditConfig:
    repo_root: str
    bug_types: tuple[str, ...] = ("npd",)
    max_depth: int = 4
    # backend
    mock_dir: Optional[str] = None
    endpoint: Optional[str] = None
    model: Optional[str] = None
    provider: str = "openai"
    api_key_env: str = "FLOWAUDIT_API_KEY"
    temperature: float = 0.0
    max_output_tokens: int = 4096
    retries: int = 3
    # ablations
    no_abstraction: bool = False
    no_validators: bool = False
    no_cache: bool = False
    # output and limits
    output_format: str = "json"
    parallel_requests: int = 4
    parallel_sources: int = 1
    rates: Optional[str] = None
    bug_config: Optional[str] = None
    dump_memory: Optional[str] = None

    def __post_init__(self):
        if isinstance(self.bug_types, str):
            self.bug_types = tuple(b.strip() for b in self.bug_types.split(",") if b.strip())
        self.bug_types = tuple(str(b).lower() for b in self.bug_types)

    def validate(self) -> "AuditConfig":
        if self.max_depth < 1:
            raise ConfigInvalid(f"max depth must be at least 1, got {self.max_depth}")
        if not self.bug_types:
            raise ConfigInvalid("at least one bug type is required")
        for b in self.bug_types:
            if b not in BUG_TYPES:
                raise ConfigInvalid(f"unsupported bug type {b!r}; choose from {sorted(BUG_TYPES)}")
        if self.output_format not in FORMATS:
            raise ConfigInvalid(f"unknown output format {self.output_format!r}")
        if self.parallel_requests < 1 or self.parallel_sources < 1:
            raise ConfigInvalid("parallelism limits must be positive")
        try:
            Decoding(self.temperature, self.max_output_tokens)
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from exc
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "AuditConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigInvalid(f"unknown configuration keys: {sorted(unknown)}")
        if "repo_root" not in data:
            raise ConfigInvalid("configuration needs repo_root")
        return cls(**data)

    @classmethod
    def load(cls, path, **overrides) -> "AuditConfig":
        """Read a JSON config file; values in the file win over ``overrides``."""
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigInvalid("config file must hold a JSON object")
        return cls.from_dict({**overrides, **data})


@dataclass(frozen=True)
class ReportSegment:
    function: str
    name: str
    file: str
    path_id: str
    statements: tuple[int, ...]
    conditions: str = ""

    def to_dict(self) -> dict:
        return {"function": self.function, "name": self.name, "file": self.file, "path_id": self.path_id,
                "statements": list(self.statements), "conditions": self.conditions}

    @classmethod
    def from_dict(cls, d: dict) -> "ReportSegment":
        return cls(d["function"], d["name"], d["file"], d["path_id"], tuple(d["statements"]), d.get("conditions", ""))


@dataclass(frozen=True)
class BugReport:
    id: str
    bug: str
    source: ProgramValue
    sink: Optional[ProgramValue]
    chain: tuple[DataFlowFact, ...]
    segments: tuple[ReportSegment, ...]
    feasibility: str = "not-checked"
    feasibility_note: str = ""
    inconclusive: tuple[str, ...] = ()

    @property
    def location(self) -> SourceLocation:
        """Where the report points: the sink, or the source for leaks."""
        return (self.sink or self.source).location

    def functions(self) -> list[str]:
        return [s.function for s in self.segments]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "bug_type": self.bug,
            "source": self.source.to_dict(),
            "sink": self.sink.to_dict() if self.sink else None,
            "chain": [f.to_dict() for f in self.chain],
            "segments": [s.to_dict() for s in self.segments],
            "feasibility": self.feasibility,
            "feasibility_note": self.feasibility_note,
            "inconclusive": list(self.inconclusive),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BugReport":
        return cls(
            d["id"],
            d["bug_type"],
            ProgramValue.from_dict(d["source"]),
            ProgramValue.from_dict(d["sink"]) if d.get("sink") else None,
            tuple(DataFlowFact.from_dict(f) for f in d["chain"]),
            tuple(ReportSegment.from_dict(s) for s in d["segments"]),
            d.get("feasibility", "not-checked"),
            d.get("feasibility_note", ""),
            tuple(d.get("inconclusive", ())),
        )

    @classmethod
    def from_candidate(cls, cand: BugCandidate, inventory: FunctionInventory, inconclusive=(),
                       verdict=None) -> "BugReport":
        segments = []
        for fid, path in cand.segments:
            fn = inventory.get(fid)
            segments.append(ReportSegment(fid, fn.name, fn.file, path.path_id,
                                          tuple(s.line for s in path.statements), path.condition_notes))
        return cls(
            cand.candidate_id,
            cand.bug.key,
            cand.source,
            cand.sink,
            tuple(cand.chain),
            tuple(segments),
            verdict.verdict.value if verdict is not None else "not-checked",
            verdict.explanation if verdict is not None else "",
            tuple(dict.fromkeys(inconclusive)),
        )


def _argument_mentions(argument: str, variable: str) -> bool:
    return bool(token_pattern(variable).search(argument))


def chain_problems(chain, inventory: FunctionInventory, graph: CallGraph) -> list[str]:
    """Reasons the chain is not connected; empty when every link checks out."""
    problems = []
    for a, b in zip(chain, chain[1:]):
        if not a.dst.same_point(b.src):
            problems.append(f"{a} does not continue into {b}")
    for f in chain:
        if f.boundary is Boundary.ARGUMENT:
            callee = inventory.get(f.dst.function)
            params = [p for p in callee.parameters if p.name == f.dst.variable]
            ok = any(
                site.caller == f.src.function
                and f.src.line >= site.location.line
                and f.src.line <= site.location.line + sum(x.count("\n") for x in site.arguments)
                and any(p.index < len(site.arguments) and _argument_mentions(site.arguments[p.index], f.src.variable)
                        for p in params)
                for site in graph.callers(callee.id)
            )
            if not ok:
                problems.append(f"no call passes {f.src} as parameter {f.dst.variable} of {callee.name}")
        elif f.boundary is Boundary.RETURN:
            ok = any(
                site.caller == f.dst.function and site.receiver_assignment == f.dst.variable
                and site.receiver_location is not None and site.receiver_location.line == f.dst.line
                for site in graph.callers(f.src.function)
            )
            if not ok:
                problems.append(f"{f.dst} does not receive the return value of {inventory.get(f.src.function).name}")
    return problems


@dataclass
class AuditRun:
    """Everything one run produced, for callers that want more than reports and ledger."""

    reports: list[BugReport] = field(default_factory=list)
    ledger: RunLedger = field(default_factory=RunLedger)
    memories: dict = field(default_factory=dict)
    inventory: Optional[FunctionInventory] = None
    inconclusive: list[str] = field(default_factory=list)

    def memory_dump(self) -> str:
        data = {key: mem.to_dict() for key, mem in sorted(self.memories.items())}
        return json.dumps(data, indent=2, sort_keys=True) + "\n"


def execute(config: AuditConfig, backend=None) -> AuditRun:
    config.validate()
    started = time.monotonic()
    rates = Rates.load(config.rates) if config.rates else Rates()
    run = AuditRun(ledger=RunLedger(rates))
    bug_config = BugSpecConfig.load(config.bug_config)
    try:
        inventory = index_repository(config.repo_root)
    except NoSupportedFiles as exc:
        logger.warning("%s", exc)
        run.ledger.wall_time = time.monotonic() - started
        return run
    run.inventory = inventory
    graph = build_call_graph(inventory)
    if backend is None:
        backend = backend_from_options(config.mock_dir, config.endpoint, config.model,
                                       config.provider, config.api_key_env)
    gateway = Gateway(backend, run.ledger, retries=config.retries, max_in_flight=config.parallel_requests)
    decoding = Decoding(config.temperature, config.max_output_tokens)
    validators = not config.no_validators

    for key in dict.fromkeys(config.bug_types):
        bug = bug_type(key)
        memory = AgentMemory()
        run.memories[bug.key] = memory
        explorer = Explorer(inventory, graph, gateway, memory, max_depth=config.max_depth, config=bug_config,
                            abstraction=not config.no_abstraction, validators=validators,
                            cache=not config.no_cache, decoding=decoding)
        sources = find_sources(inventory, bug, bug_config)
        logger.info("%s: %d sources", bug.name, len(sources))
        for result in explorer.explore(sources, bug, config.parallel_sources):
            run.inconclusive.extend(result.inconclusive)
            label = f"{result.source.variable}@{result.source.location.file}:{result.source.line}"
            for cand in result.candidates:
                problems = chain_problems(cand.chain, inventory, graph)
                if problems:
                    logger.error("dropping candidate %s with a broken chain: %s", cand.candidate_id, "; ".join(problems))
                    continue
                verdict = None
                if validators:
                    verdict = validate_feasibility(cand, gateway, inventory, decoding=decoding, source=label)
                    cand.feasibility = verdict.verdict.value
                    if not verdict.feasible:
                        logger.info("candidate %s discarded: %s", cand.candidate_id, verdict.explanation)
                        continue
                run.reports.append(BugReport.from_candidate(cand, inventory, result.inconclusive, verdict))
        run.ledger.cache_hits += memory.hits
        run.ledger.cache_misses += memory.misses

    if gateway.failures and run.ledger.prompt_rounds == 0:
        raise BackendUnreachable("every model query failed")
    run.reports.sort(key=lambda r: (r.bug, r.location.file, r.location.line, r.id))
    if config.dump_memory:
        Path(config.dump_memory).write_text(run.memory_dump())
    run.ledger.wall_time = time.monotonic() - started
    return run


def run_audit(config: AuditConfig, backend=None) -> tuple[list[BugReport], RunLedger]:
    """Audit ``config.repo_root``; returns the reports and the run ledger."""
    run = execute(config, backend)
    return run.reports, run.ledger
