"""Agent memory: per-function, per-value analysis results, doubling as the cache.

``AgentMemory`` maps ``(function id, ProgramValue)`` to the list of
:class:`PathRecord` the model produced for that value inside that function.
A key is written once and never modified; empty results are cached too.
"""

from __future__ import annotations

import enum
import json
import threading
from dataclasses import dataclass, field
from typing import Optional

from .bugspec import ProgramValue
from .errors import AlreadyPresent
from .frontend import CallSite, SourceLocation

MEMORY_FORMAT = "flowaudit-memory"
MEMORY_VERSION = 1


class Boundary(enum.Enum):
    """How a chain link crosses a function boundary."""

    RETURN = "return"
    ARGUMENT = "argument"


@dataclass(frozen=True)
class DataFlowFact:
    """``src`` may affect ``dst``.

    Facts produced by function analysis are intra-procedural.  The explorer
    joins per-function segments with boundary facts (``boundary`` set) that
    link a returned value to its receiver or an argument to its parameter.
    """

    src: ProgramValue
    dst: ProgramValue
    boundary: Optional[Boundary] = None

    def __post_init__(self):
        if self.boundary is None and self.src.function != self.dst.function:
            raise ValueError(f"intra-procedural fact spans two functions: {self}")

    def __str__(self) -> str:
        return f"{self.src} -> {self.dst}"

    def to_dict(self) -> dict:
        d = {"src": self.src.to_dict(), "dst": self.dst.to_dict()}
        if self.boundary is not None:
            d["boundary"] = self.boundary.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DataFlowFact":
        boundary = Boundary(d["boundary"]) if d.get("boundary") else None
        return cls(ProgramValue.from_dict(d["src"]), ProgramValue.from_dict(d["dst"]), boundary)


class EscapeKind(enum.Enum):
    TO_CALLEE_ARGUMENT = "ToCalleeArgument"
    TO_CALLER_RETURN = "ToCallerReturn"
    TO_GLOBAL = "ToGlobal"


def _loc_dict(loc: SourceLocation) -> dict:
    return {"file": loc.file, "line": loc.line, "column": loc.column}


def _site_dict(site: CallSite) -> dict:
    return {
        "caller": site.caller,
        "callee_name": site.callee_name,
        "location": _loc_dict(site.location),
        "arguments": list(site.arguments),
        "receiver_assignment": site.receiver_assignment,
        "receiver_location": _loc_dict(site.receiver_location) if site.receiver_location else None,
        "indirect": site.indirect,
    }


def _site_from(d: dict) -> CallSite:
    recv = d.get("receiver_location")
    return CallSite(
        caller=d["caller"],
        callee_name=d["callee_name"],
        location=SourceLocation(**d["location"]),
        arguments=tuple(d["arguments"]),
        receiver_assignment=d.get("receiver_assignment"),
        receiver_location=SourceLocation(**recv) if recv else None,
        indirect=d.get("indirect", False),
    )


@dataclass(frozen=True)
class EscapeAnnotation:
    kind: EscapeKind
    value: ProgramValue
    call_site: Optional[CallSite] = None
    argument_index: Optional[int] = None

    def __post_init__(self):
        if self.kind is EscapeKind.TO_CALLEE_ARGUMENT and (self.call_site is None or self.argument_index is None):
            raise ValueError("callee-argument escape needs a call site and an argument index")

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "value": self.value.to_dict()}
        if self.call_site is not None:
            d["call_site"] = _site_dict(self.call_site)
        if self.argument_index is not None:
            d["argument_index"] = self.argument_index
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EscapeAnnotation":
        site = d.get("call_site")
        return cls(
            EscapeKind(d["kind"]),
            ProgramValue.from_dict(d["value"]),
            _site_from(site) if site else None,
            d.get("argument_index"),
        )


@dataclass(frozen=True)
class PathRecord:
    path_id: str
    statements: tuple[SourceLocation, ...]
    facts: tuple[DataFlowFact, ...] = ()
    escapes: tuple[EscapeAnnotation, ...] = ()
    condition_notes: str = ""

    def __post_init__(self):
        if not self.statements:
            raise ValueError("a path record needs at least one statement")

    def to_dict(self) -> dict:
        return {
            "path_id": self.path_id,
            "statements": [_loc_dict(s) for s in self.statements],
            "facts": [f.to_dict() for f in self.facts],
            "escapes": [e.to_dict() for e in self.escapes],
            "condition_notes": self.condition_notes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PathRecord":
        return cls(
            d["path_id"],
            tuple(SourceLocation(**s) for s in d["statements"]),
            tuple(DataFlowFact.from_dict(f) for f in d["facts"]),
            tuple(EscapeAnnotation.from_dict(e) for e in d["escapes"]),
            d.get("condition_notes", ""),
        )


def _key_order(key):
    fid, value = key
    loc = value.location
    return (fid, loc.file, loc.line, loc.column, value.variable, value.role.value)


@dataclass
class AgentMemory:
    entries: dict = field(default_factory=dict)
    hits: int = 0
    misses: int = 0
    check_records: bool = __debug__

    def __post_init__(self):
        self._cond = threading.Condition()
        self._claimed: set = set()

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key) -> bool:
        return key in self.entries

    def lookup(self, function: str, value: ProgramValue) -> Optional[list[PathRecord]]:
        with self._cond:
            records = self.entries.get((function, value))
            if records is None:
                self.misses += 1
                return None
            self.hits += 1
            return list(records)

    def store(self, function: str, value: ProgramValue, records) -> None:
        records = tuple(records)
        if self.check_records:
            for rec in records:
                for fact in rec.facts:
                    assert fact.boundary is None and fact.src.function == function, fact
        with self._cond:
            key = (function, value)
            if key in self.entries:
                raise AlreadyPresent(f"{value} in {function} is already in memory")
            self.entries[key] = records
            self._claimed.discard(key)
            self._cond.notify_all()

    def claim(self, function: str, value: ProgramValue) -> bool:
        """Reserve a key before analyzing it.

        Returns True when the caller now owns the analysis.  Returns False when
        the key is already stored, waiting first if another worker holds the
        claim.
        """
        key = (function, value)
        with self._cond:
            while key in self._claimed:
                self._cond.wait()
            if key in self.entries:
                return False
            self._claimed.add(key)
            return True

    def release(self, function: str, value: ProgramValue) -> None:
        """Drop a claim without storing (the analysis failed)."""
        with self._cond:
            self._claimed.discard((function, value))
            self._cond.notify_all()

    def keys(self) -> list:
        with self._cond:
            return sorted(self.entries, key=_key_order)

    def to_dict(self) -> dict:
        return {
            "format": MEMORY_FORMAT,
            "version": MEMORY_VERSION,
            "entries": [
                {
                    "function": fid,
                    "value": value.to_dict(),
                    "records": [r.to_dict() for r in self.entries[(fid, value)]],
                }
                for fid, value in self.keys()
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "AgentMemory":
        if data.get("format") != MEMORY_FORMAT or data.get("version") != MEMORY_VERSION:
            raise ValueError("not a flowaudit memory dump")
        memory = cls()
        for entry in data["entries"]:
            value = ProgramValue.from_dict(entry["value"])
            memory.entries[(entry["function"], value)] = tuple(PathRecord.from_dict(r) for r in entry["records"])
        return memory

    @classmethod
    def loads(cls, text: str) -> "AgentMemory":
        return cls.from_dict(json.loads(text))
