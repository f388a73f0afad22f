"""Compilation-free indexing of a C repository.

Files are parsed as written with tree-sitter (no preprocessing).  The
result is an immutable :class:`FunctionInventory` plus a name-resolved
:class:`CallGraph`; both are safe to share between threads.
"""

from __future__ import annotations

import hashlib
import logging
import re
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Optional

import tree_sitter_c
from tree_sitter import Language, Node, Parser

from .errors import NoSupportedFiles, RootNotFound, UnknownFunction

logger = logging.getLogger(__name__)

C_LANGUAGE = Language(tree_sitter_c.language())

SUFFIXES = {"c": (".c", ".h")}

_WRAPPING_DECLARATORS = {
    "pointer_declarator",
    "parenthesized_declarator",
    "attributed_declarator",
    "array_declarator",
    "init_declarator",
    "function_declarator",
}


def make_parser(language: str = "c") -> Parser:
    if language != "c":
        raise ValueError(f"unsupported language: {language!r}")
    return Parser(C_LANGUAGE)


@dataclass(frozen=True, order=True)
class SourceLocation:
    file: str
    line: int
    column: int = 0

    def __post_init__(self):
        if self.line < 1:
            raise ValueError(f"line must be >= 1, got {self.line}")

    def __str__(self) -> str:
        return f"{self.file}:{self.line}" + (f":{self.column}" if self.column else "")


@dataclass(frozen=True)
class Parameter:
    name: str
    index: int
    location: SourceLocation


@dataclass(frozen=True)
class CallSite:
    caller: str
    callee_name: str
    location: SourceLocation
    arguments: tuple[str, ...] = ()
    receiver_assignment: Optional[str] = None
    receiver_location: Optional[SourceLocation] = None
    indirect: bool = False


@dataclass(frozen=True)
class FunctionRecord:
    id: str
    name: str
    file: str
    span: tuple[int, int]
    source_text: str
    parameters: tuple[Parameter, ...] = ()
    call_sites: tuple[CallSite, ...] = ()
    start_column: int = 1

    def contains_line(self, line: int) -> bool:
        return self.span[0] <= line <= self.span[1]

    def line_text(self, line: int) -> str:
        """Text of a repository line inside this function (empty outside the span)."""
        if not self.contains_line(line):
            return ""
        lines = self.source_text.split("\n")
        return lines[line - self.span[0]]

    def numbered_source(self) -> str:
        return "\n".join(
            f"{self.span[0] + i:>4}  {text}" for i, text in enumerate(self.source_text.split("\n"))
        )


@dataclass(frozen=True)
class ParseWarning:
    file: str
    line: int
    message: str


@dataclass(frozen=True)
class FunctionInventory:
    root: str
    language: str
    files: tuple[str, ...]
    functions: tuple[FunctionRecord, ...]
    warnings: tuple[ParseWarning, ...] = ()
    _by_id: dict = field(default_factory=dict, compare=False, repr=False)
    _by_name: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        by_name = defaultdict(list)
        for fn in self.functions:
            if fn.id in self._by_id:
                raise ValueError(f"duplicate function id {fn.id}")
            self._by_id[fn.id] = fn
            by_name[fn.name].append(fn)
        self._by_name.update(by_name)

    def __len__(self) -> int:
        return len(self.functions)

    def __iter__(self) -> Iterator[FunctionRecord]:
        return iter(self.functions)

    def get(self, function_id: str) -> FunctionRecord:
        try:
            return self._by_id[function_id]
        except KeyError:
            raise UnknownFunction(function_id) from None

    def by_name(self, name: str) -> list[FunctionRecord]:
        return list(self._by_name.get(name, ()))

    def get_function_source(self, function_id: str) -> str:
        return self.get(function_id).source_text

    def dump(self) -> str:
        """One tab-separated record per function, for debugging."""
        rows = ["id\tname\tfile\tspan\tcall_sites"]
        for fn in self.functions:
            rows.append(f"{fn.id}\t{fn.name}\t{fn.file}\t{fn.span[0]}-{fn.span[1]}\t{len(fn.call_sites)}")
        return "\n".join(rows) + "\n"


def function_id(file: str, name: str, start_line: int) -> str:
    return hashlib.sha256(f"{file}\0{name}\0{start_line}".encode()).hexdigest()[:16]


def _text(node: Node) -> str:
    return node.text.decode("utf-8", errors="replace")


def _loc(file: str, node: Node, line_offset: int = 0) -> SourceLocation:
    return SourceLocation(file, node.start_point.row + 1 + line_offset, node.start_point.column + 1)


def declarator_identifier(node: Optional[Node]) -> Optional[Node]:
    """Descend through pointer/array/parenthesized declarators to the named identifier."""
    while node is not None:
        if node.type in ("identifier", "field_identifier", "type_identifier"):
            return node
        if node.type in _WRAPPING_DECLARATORS:
            node = node.child_by_field_name("declarator")
            continue
        return None
    return None


def _function_declarator(node: Node) -> Optional[Node]:
    decl = node.child_by_field_name("declarator")
    while decl is not None and decl.type != "function_declarator":
        decl = decl.child_by_field_name("declarator")
    return decl


def _walk(node: Node, stop: Iterable[str] = ()) -> Iterator[Node]:
    stack = [node]
    while stack:
        cur = stack.pop()
        yield cur
        if cur is not node and cur.type in stop:
            continue
        stack.extend(reversed(cur.children))


def _error_regions(root: Node) -> list[Node]:
    regions = []
    stack = [root]
    while stack:
        cur = stack.pop()
        if cur.type == "ERROR" or cur.is_missing:
            regions.append(cur)
            continue
        if cur.has_error:
            stack.extend(reversed(cur.children))
    return regions


def _receiver(call: Node) -> tuple[Optional[Node], Optional[Node]]:
    """Return (receiver node, whole assignment node) when the call's value is stored."""
    node = call
    parent = node.parent
    while parent is not None and parent.type in ("cast_expression", "parenthesized_expression"):
        node, parent = parent, parent.parent
    if parent is None:
        return None, None
    if parent.type == "assignment_expression" and parent.child_by_field_name("right") == node:
        op = parent.child_by_field_name("operator")
        if op is None or _text(op) == "=":
            return parent.child_by_field_name("left"), parent
    if parent.type == "init_declarator" and parent.child_by_field_name("value") == node:
        return declarator_identifier(parent.child_by_field_name("declarator")), parent
    return None, None


def _extract_function(node: Node, rel: str) -> Optional[FunctionRecord]:
    fdecl = _function_declarator(node)
    if fdecl is None:
        return None
    name_node = fdecl.child_by_field_name("declarator")
    name_node = declarator_identifier(name_node) if name_node is not None else None
    if name_node is None:
        return None
    name = _text(name_node)
    start, end = node.start_point.row + 1, node.end_point.row + 1
    fid = function_id(rel, name, start)

    params = []
    plist = fdecl.child_by_field_name("parameters")
    if plist is not None:
        for child in plist.named_children:
            if child.type != "parameter_declaration":
                continue
            ident = declarator_identifier(child.child_by_field_name("declarator"))
            if ident is None:
                continue
            params.append(Parameter(_text(ident), len(params), _loc(rel, ident)))

    calls = []
    body = node.child_by_field_name("body")
    if body is not None:
        for sub in _walk(body):
            if sub.type != "call_expression":
                continue
            target = sub.child_by_field_name("function")
            args_node = sub.child_by_field_name("arguments")
            args = tuple(
                _text(a) for a in (args_node.named_children if args_node is not None else ()) if a.type != "comment"
            )
            recv, _ = _receiver(sub)
            calls.append(
                CallSite(
                    caller=fid,
                    callee_name=_text(target) if target is not None else "",
                    location=_loc(rel, sub),
                    arguments=args,
                    receiver_assignment=_text(recv) if recv is not None else None,
                    receiver_location=_loc(rel, recv) if recv is not None else None,
                    indirect=target is None or target.type != "identifier",
                )
            )
    calls.sort(key=lambda c: (c.location.line, c.location.column))
    return FunctionRecord(
        id=fid,
        name=name,
        file=rel,
        span=(start, end),
        source_text=node.text.decode("utf-8", errors="surrogateescape"),
        parameters=tuple(params),
        call_sites=tuple(calls),
        start_column=node.start_point.column + 1,
    )


def _index_file(path: Path, rel: str, language: str):
    try:
        data = path.read_bytes()
    except OSError as exc:
        logger.warning("skipping unreadable file %s: %s", rel, exc)
        return None
    tree = make_parser(language).parse(data)
    functions = []
    warnings = [
        ParseWarning(rel, region.start_point.row + 1, "syntax error region; definitions inside it are skipped")
        for region in _error_regions(tree.root_node)
    ]
    for node in _walk(tree.root_node, stop=("function_definition", "ERROR")):
        if node.type != "function_definition" or node.has_error:
            continue
        rec = _extract_function(node, rel)
        if rec is not None:
            functions.append(rec)
    for w in warnings:
        logger.warning("%s:%d: %s", w.file, w.line, w.message)
    return functions, warnings


def index_repository(root, language: str = "c", workers: Optional[int] = None) -> FunctionInventory:
    """Parse every supported file under ``root`` and inventory its function definitions."""
    root_path = Path(root)
    if not root_path.is_dir():
        raise RootNotFound(str(root))
    suffixes = SUFFIXES.get(language)
    if suffixes is None:
        raise ValueError(f"unsupported language: {language!r}")
    paths = sorted(
        (p for p in root_path.rglob("*") if p.is_file() and p.suffix in suffixes),
        key=lambda p: p.relative_to(root_path).as_posix(),
    )
    rels = [p.relative_to(root_path).as_posix() for p in paths]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda pr: _index_file(pr[0], pr[1], language), zip(paths, rels)))

    files, functions, warnings = [], [], []
    for rel, res in zip(rels, results):
        if res is None:
            continue
        files.append(rel)
        functions.extend(res[0])
        warnings.extend(res[1])
    if not files:
        raise NoSupportedFiles(f"no parseable {language} files under {root}")
    return FunctionInventory(
        root=str(root_path),
        language=language,
        files=tuple(files),
        functions=tuple(functions),
        warnings=tuple(warnings),
    )


@dataclass(frozen=True)
class CallGraph:
    nodes: frozenset
    edges: tuple[tuple[CallSite, str], ...]
    unresolved: tuple[CallSite, ...]

    def callees(self, site: CallSite) -> list[str]:
        return [callee for s, callee in self.edges if s == site]

    def callers(self, function_id: str) -> list[CallSite]:
        return [s for s, callee in self.edges if callee == function_id]


def build_call_graph(inventory: FunctionInventory) -> CallGraph:
    """Resolve call sites by name; collisions over-approximate, misses go to ``unresolved``."""
    edges, unresolved = [], []
    for fn in inventory:
        for site in fn.call_sites:
            targets = [] if site.indirect else inventory.by_name(site.callee_name)
            if not targets:
                unresolved.append(site)
            for target in targets:
                edges.append((site, target.id))
    return CallGraph(frozenset(fn.id for fn in inventory), tuple(edges), tuple(unresolved))


_IDENT_CHAR = r"[A-Za-z0-9_]"


def token_pattern(text: str) -> re.Pattern:
    """Match ``text`` as a whole token (not as part of a longer identifier)."""
    return re.compile(rf"(?<!{_IDENT_CHAR}){re.escape(text)}(?!{_IDENT_CHAR})")


def locate(function: FunctionRecord, variable: str, line: int) -> Optional[SourceLocation]:
    """First occurrence of ``variable`` on ``line`` as a location, or None when absent."""
    text = function.line_text(line)
    m = token_pattern(variable).search(text) if text else None
    if m is None:
        return None
    column = m.start() + 1
    if line == function.span[0]:
        # source_text starts at the definition's first byte, not necessarily column 1
        column += function.start_column - 1
    return SourceLocation(function.file, line, column)


@lru_cache(maxsize=4096)
def parse_function(function: FunctionRecord) -> Optional[Node]:
    """Re-parse a function's text; returns its ``function_definition`` node."""
    tree = make_parser().parse(function.source_text.encode("utf-8", errors="surrogateescape"))
    for node in tree.root_node.named_children:
        if node.type == "function_definition":
            return node
    return None


def line_defines(function: FunctionRecord, line: int, target: str, source: str) -> bool:
    """True when ``line`` assigns ``target`` from an expression that reads ``source``."""
    node = parse_function(function)
    if node is None:
        return False
    offset = function.span[0] - 1
    src_pat = token_pattern(source)
    for sub in _walk(node):
        if sub.start_point.row + 1 + offset != line:
            continue
        if sub.type == "assignment_expression":
            left, right = sub.child_by_field_name("left"), sub.child_by_field_name("right")
        elif sub.type == "init_declarator":
            left = declarator_identifier(sub.child_by_field_name("declarator"))
            right = sub.child_by_field_name("value")
        else:
            continue
        if left is None or right is None:
            continue
        if _text(left) == target and src_pat.search(_text(right)):
            return True
    return False
