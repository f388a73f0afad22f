"""Model-assisted, demand-driven source-to-sink auditing of C repositories."""

__version__ = "0.1.0"

from .audit import AuditConfig, BugReport, run_audit  # noqa: E402
from .bugspec import MLK, NPD, UAF, BugType, ProgramValue, Role, bug_type, find_sinks, find_sources  # noqa: E402
from .cfg import Order, statement_precedes  # noqa: E402
from .explorer import BugCandidate, ExplorationTask, Explorer  # noqa: E402
from .frontend import (  # noqa: E402
    CallGraph,
    CallSite,
    FunctionInventory,
    FunctionRecord,
    SourceLocation,
    build_call_graph,
    index_repository,
)
from .memory import AgentMemory, DataFlowFact, EscapeAnnotation, EscapeKind, PathRecord  # noqa: E402
from .report import emit_report  # noqa: E402
from .validators import validate_feasibility, validate_order  # noqa: E402

__all__ = [
    "AgentMemory",
    "AuditConfig",
    "BugCandidate",
    "BugReport",
    "BugType",
    "CallGraph",
    "CallSite",
    "DataFlowFact",
    "EscapeAnnotation",
    "EscapeKind",
    "ExplorationTask",
    "Explorer",
    "FunctionInventory",
    "FunctionRecord",
    "MLK",
    "NPD",
    "Order",
    "PathRecord",
    "ProgramValue",
    "Role",
    "SourceLocation",
    "UAF",
    "bug_type",
    "build_call_graph",
    "emit_report",
    "find_sinks",
    "find_sources",
    "index_repository",
    "run_audit",
    "statement_precedes",
    "validate_feasibility",
    "validate_order",
]
