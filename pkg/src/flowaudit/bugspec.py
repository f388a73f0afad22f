"""Bug-type definitions and the source/sink pattern matchers.

Three bug types ship:

* NPD: a null literal (source) reaching a dereferenced pointer (sink).
* UAF: a freed pointer (source) reaching a dereference or another free (sink).
* MLK: an allocated pointer (source) that fails to reach a free (sink) on
  some feasible path.

Allocator and deallocator names come from a JSON configuration file (see
``data/bugtypes.json`` for the defaults and :data:`CONFIG_SCHEMA`).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema

from .errors import ConfigInvalid, UnsupportedBugType
from .frontend import (
    FunctionInventory,
    FunctionRecord,
    SourceLocation,
    _text,
    _walk,
    declarator_identifier,
    parse_function,
)


class ReportRule(enum.Enum):
    REPORT_IF_SINK_REACHED = "ReportIfSinkReached"
    REPORT_IF_NO_SINK_REACHED = "ReportIfNoSinkReached"


class Role(enum.Enum):
    SOURCE = "Source"
    SINK = "Sink"
    PARAMETER = "Parameter"
    ARGUMENT = "Argument"
    RETURN_VALUE = "ReturnValue"
    INTERMEDIATE = "Intermediate"


@dataclass(frozen=True)
class BugType:
    name: str
    report_rule: ReportRule
    source_description: str
    sink_description: str

    @property
    def key(self) -> str:
        return self.name.lower()


NPD = BugType(
    "NPD",
    ReportRule.REPORT_IF_SINK_REACHED,
    "a null value assigned to a pointer variable",
    "a dereference of a pointer (*p, p->f, p[i])",
)
MLK = BugType(
    "MLK",
    ReportRule.REPORT_IF_NO_SINK_REACHED,
    "a pointer receiving memory from an allocation call",
    "the argument of a deallocation call such as free(p)",
)
UAF = BugType(
    "UAF",
    ReportRule.REPORT_IF_SINK_REACHED,
    "the pointer argument of a deallocation call",
    "a dereference of the pointer or a second deallocation of it",
)

BUG_TYPES = {b.key: b for b in (NPD, MLK, UAF)}


def bug_type(name) -> BugType:
    if isinstance(name, BugType):
        return name
    try:
        return BUG_TYPES[str(name).lower()]
    except KeyError:
        raise UnsupportedBugType(f"unsupported bug type: {name!r}") from None


@dataclass(frozen=True)
class ProgramValue:
    """A variable (or literal) at a statement, ``variable@line`` inside ``function``.

    Equality is the memory key: function, variable text, location and role.
    ``receiver`` names the variable a source literal is assigned to; it is
    informational and excluded from equality.
    """

    variable: str
    location: SourceLocation
    function: str
    role: Role = Role.INTERMEDIATE
    receiver: Optional[str] = field(default=None, compare=False)

    @property
    def line(self) -> int:
        return self.location.line

    def same_point(self, other: "ProgramValue") -> bool:
        """Same variable at the same line of the same function (column and role ignored)."""
        return (self.function, self.variable, self.location.line) == (
            other.function,
            other.variable,
            other.location.line,
        )

    def __str__(self) -> str:
        return f"{self.variable}@{self.location.line}"

    def to_dict(self) -> dict:
        d = {
            "variable": self.variable,
            "function": self.function,
            "file": self.location.file,
            "line": self.location.line,
            "column": self.location.column,
            "role": self.role.value,
        }
        if self.receiver is not None:
            d["receiver"] = self.receiver
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ProgramValue":
        return cls(
            d["variable"],
            SourceLocation(d["file"], d["line"], d.get("column", 0)),
            d["function"],
            Role(d["role"]),
            d.get("receiver"),
        )


CONFIG_SCHEMA = {
    "type": "object",
    "required": ["version", "bug_types"],
    "properties": {
        "version": {"const": 1},
        "bug_types": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "npd": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"null_literals": {"$ref": "#/$defs/names"}},
                },
                "mlk": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "allocators": {"$ref": "#/$defs/names"},
                        "deallocators": {"$ref": "#/$defs/names"},
                    },
                },
                "uaf": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"deallocators": {"$ref": "#/$defs/names"}},
                },
            },
        },
    },
    "$defs": {
        "names": {"type": "array", "items": {"type": "string", "pattern": "^[A-Za-z_][A-Za-z0-9_]*$"}},
    },
}


@dataclass(frozen=True)
class BugSpecConfig:
    null_literals: tuple[str, ...] = ("NULL", "nullptr")
    allocators: tuple[str, ...] = ("malloc", "calloc", "realloc", "strdup")
    mlk_deallocators: tuple[str, ...] = ("free",)
    uaf_deallocators: tuple[str, ...] = ("free",)

    @classmethod
    def from_dict(cls, data: dict) -> "BugSpecConfig":
        try:
            jsonschema.validate(data, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise ConfigInvalid(f"bug-type configuration: {exc.message}") from exc
        types = data["bug_types"]
        default = cls()
        return cls(
            null_literals=tuple(types.get("npd", {}).get("null_literals", default.null_literals)),
            allocators=tuple(types.get("mlk", {}).get("allocators", default.allocators)),
            mlk_deallocators=tuple(types.get("mlk", {}).get("deallocators", default.mlk_deallocators)),
            uaf_deallocators=tuple(types.get("uaf", {}).get("deallocators", default.uaf_deallocators)),
        )

    @classmethod
    def load(cls, path=None) -> "BugSpecConfig":
        if path is None:
            text = resources.files("flowaudit").joinpath("data/bugtypes.json").read_text()
        else:
            text = Path(path).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"bug-type configuration is not JSON: {exc}") from exc
        return cls.from_dict(data)

    def deallocators(self, bug: BugType) -> tuple[str, ...]:
        return self.uaf_deallocators if bug.key == "uaf" else self.mlk_deallocators


_UNWRAP = ("cast_expression", "parenthesized_expression")


def _unwrap(node):
    while node is not None and node.type in _UNWRAP:
        node = node.child_by_field_name("value") or node.named_children[-1]
    return node


def _strip_parens(text: str) -> str:
    while text.startswith("(") and text.endswith(")"):
        text = text[1:-1].strip()
    return text


def _value(fn: FunctionRecord, node, role: Role, text: Optional[str] = None, receiver=None) -> ProgramValue:
    offset = fn.span[0] - 1
    loc = SourceLocation(fn.file, node.start_point.row + 1 + offset, node.start_point.column + 1)
    return ProgramValue(text if text is not None else _text(node), loc, fn.id, role, receiver)


def _assignments(fn: FunctionRecord):
    """Yield (target node, value node) for plain assignments and initialized declarations."""
    root = parse_function(fn)
    if root is None:
        return
    for node in _walk(root):
        if node.type == "assignment_expression":
            op = node.child_by_field_name("operator")
            if op is not None and _text(op) != "=":
                continue
            yield node.child_by_field_name("left"), node.child_by_field_name("right")
        elif node.type == "init_declarator":
            yield declarator_identifier(node.child_by_field_name("declarator")), node.child_by_field_name("value")


def _calls(fn: FunctionRecord, names):
    root = parse_function(fn)
    if root is None:
        return
    for node in _walk(root):
        if node.type != "call_expression":
            continue
        target = node.child_by_field_name("function")
        if target is not None and target.type == "identifier" and _text(target) in names:
            yield node


def _is_null(node, literals) -> bool:
    node = _unwrap(node)
    if node is None:
        return False
    return node.type == "null" or (node.type == "identifier" and _text(node) in literals)


def _npd_sources(fn, config):
    for target, value in _assignments(fn):
        if target is None or value is None or not _is_null(value, config.null_literals):
            continue
        literal = _unwrap(value)
        yield _value(fn, literal, Role.SOURCE, receiver=_text(target))


def _mlk_sources(fn, config):
    for target, value in _assignments(fn):
        call = _unwrap(value)
        if target is None or call is None or call.type != "call_expression":
            continue
        callee = call.child_by_field_name("function")
        if callee is not None and callee.type == "identifier" and _text(callee) in config.allocators:
            yield _value(fn, target, Role.SOURCE)


def _dealloc_args(fn, names, role):
    for call in _calls(fn, names):
        args = call.child_by_field_name("arguments")
        first = next((a for a in args.named_children if a.type != "comment"), None) if args else None
        if first is not None:
            yield _value(fn, first, role, text=_strip_parens(_text(first)))


def _dereferences(fn):
    root = parse_function(fn)
    if root is None:
        return
    for node in _walk(root):
        if node.type == "pointer_expression":
            op = node.child_by_field_name("operator")
            if op is None or _text(op) != "*":
                continue
        elif node.type == "field_expression":
            op = node.child_by_field_name("operator")
            if op is None or _text(op) != "->":
                continue
        elif node.type != "subscript_expression":
            continue
        base = node.child_by_field_name("argument")
        if base is None:
            continue
        yield _value(fn, base, Role.SINK, text=_strip_parens(_text(base)))


def _ordered(values) -> list[ProgramValue]:
    unique = dict.fromkeys(values)
    return sorted(unique, key=lambda v: (v.location.file, v.location.line, v.location.column, v.variable))


def find_sources(inventory: FunctionInventory, bug, config: Optional[BugSpecConfig] = None) -> list[ProgramValue]:
    """Source values of ``bug`` in (file, line, column) order."""
    bug = bug_type(bug)
    config = config or BugSpecConfig()
    found = []
    for fn in inventory:
        if bug.key == "npd":
            found.extend(_npd_sources(fn, config))
        elif bug.key == "mlk":
            found.extend(_mlk_sources(fn, config))
        else:
            found.extend(_dealloc_args(fn, config.uaf_deallocators, Role.SOURCE))
    return _ordered(found)


def find_sinks(inventory: FunctionInventory, bug, config: Optional[BugSpecConfig] = None) -> list[ProgramValue]:
    """Sink values of ``bug`` in (file, line, column) order."""
    bug = bug_type(bug)
    config = config or BugSpecConfig()
    found = []
    for fn in inventory:
        if bug.key in ("npd", "uaf"):
            found.extend(_dereferences(fn))
        if bug.key == "mlk":
            found.extend(_dealloc_args(fn, config.mlk_deallocators, Role.SINK))
        if bug.key == "uaf":
            found.extend(_dealloc_args(fn, config.uaf_deallocators, Role.SINK))
    return _ordered(found)
