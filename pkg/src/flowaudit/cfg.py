"""Syntactic control-flow graphs and statement ordering.

The graph is built from the tree-sitter parse of one function.  Nodes are
simple statements and branch conditions; each carries the line range of the
syntax it stands for.  Ordering queries are answered at line granularity,
which is the granularity model-reported facts use.
"""

from __future__ import annotations

import enum
import logging
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

from tree_sitter import Node

from .errors import LocationOutsideFunction
from .frontend import FunctionRecord, SourceLocation, parse_function

logger = logging.getLogger(__name__)


class Order(enum.Enum):
    MUST_PRECEDE = "MustPrecede"
    MAY_PRECEDE = "MayPrecede"
    CANNOT_PRECEDE = "CannotPrecede"
    UNKNOWN = "Unknown"

    @property
    def possible(self) -> bool:
        return self in (Order.MUST_PRECEDE, Order.MAY_PRECEDE)


_SIMPLE = {
    "expression_statement",
    "declaration",
    "type_definition",
    "attributed_statement",
    "seh_try_statement",
    "asm_statement",
}


@dataclass
class CfgNode:
    id: int
    kind: str
    first_line: int
    last_line: int
    succ: list[int] = field(default_factory=list)


@dataclass
class _Ctx:
    brk: Optional[int] = None
    cont: Optional[int] = None


class ControlFlowGraph:
    """Statement-level CFG of a single function (lines are repository lines)."""

    def __init__(self, function: FunctionRecord):
        self.function = function
        self.nodes: list[CfgNode] = []
        self.unmodeled: set[int] = set()
        self._labels: dict[str, int] = {}
        self._offset = function.span[0] - 1

        root = parse_function(function)
        self.exit = self._new("exit", function.span[1], function.span[1])
        if root is None or root.child_by_field_name("body") is None:
            self.unmodeled.update(range(function.span[0], function.span[1] + 1))
            self.entry = self._new("entry", function.span[0], function.span[0])
            self.entry_reachable = {self.entry}
            return
        body = root.child_by_field_name("body")
        self.entry = self._new("entry", function.span[0], self._line(body))
        for node in _iter(body):
            if node.type == "labeled_statement":
                label = node.child_by_field_name("label")
                self._labels[label.text.decode()] = self._new("label", self._line(node), self._line(node))
        self.nodes[self.entry].succ.append(self._build(body, self.exit, _Ctx()))
        self.entry_reachable = self.reachable_from([self.entry], include_start=True)

    # construction --------------------------------------------------------

    def _line(self, node: Node) -> int:
        return node.start_point.row + 1 + self._offset

    def _last(self, node: Node) -> int:
        return node.end_point.row + 1 + self._offset

    def _new(self, kind: str, first: int, last: int, succ=()) -> int:
        self.nodes.append(CfgNode(len(self.nodes), kind, first, last, list(succ)))
        return len(self.nodes) - 1

    def _simple(self, node: Node, nxt: int) -> int:
        return self._new(node.type, self._line(node), self._last(node), [nxt])

    def _seq(self, stmts: list[Node], nxt: int, ctx: _Ctx) -> int:
        for stmt in reversed(stmts):
            nxt = self._build(stmt, nxt, ctx)
        return nxt

    def _build(self, node: Node, nxt: int, ctx: _Ctx) -> int:
        t = node.type
        if t == "comment":
            return nxt
        if t == "compound_statement":
            return self._seq([c for c in node.named_children], nxt, ctx)
        if t in _SIMPLE:
            return self._simple(node, nxt)
        if t == "if_statement":
            cond = node.child_by_field_name("condition")
            c = self._new("condition", self._line(cond), self._last(cond))
            then = self._build(node.child_by_field_name("consequence"), nxt, ctx)
            alt = node.child_by_field_name("alternative")
            if alt is not None:
                inner = [ch for ch in alt.named_children if ch.type != "comment"]
                other = self._seq(inner, nxt, ctx)
            else:
                other = nxt
            self.nodes[c].succ = [then, other]
            return c
        if t == "while_statement":
            cond = node.child_by_field_name("condition")
            c = self._new("condition", self._line(cond), self._last(cond))
            body = self._build(node.child_by_field_name("body"), c, _Ctx(nxt, c))
            self.nodes[c].succ = [body, nxt]
            return c
        if t == "do_statement":
            cond = node.child_by_field_name("condition")
            c = self._new("condition", self._line(cond), self._last(cond))
            body = self._build(node.child_by_field_name("body"), c, _Ctx(nxt, c))
            self.nodes[c].succ = [body, nxt]
            return body
        if t == "for_statement":
            return self._for(node, nxt)
        if t == "switch_statement":
            return self._switch(node, nxt, ctx)
        if t == "return_statement":
            return self._new("return", self._line(node), self._last(node), [self.exit])
        if t == "break_statement":
            return self._new("break", self._line(node), self._last(node), [ctx.brk if ctx.brk is not None else nxt])
        if t == "continue_statement":
            return self._new("continue", self._line(node), self._last(node), [ctx.cont if ctx.cont is not None else nxt])
        if t == "goto_statement":
            label = node.child_by_field_name("label").text.decode()
            target = self._labels.get(label, self.exit)
            return self._new("goto", self._line(node), self._last(node), [target])
        if t == "labeled_statement":
            label = self._labels[node.child_by_field_name("label").text.decode()]
            inner = [c for c in node.named_children if c.type not in ("statement_identifier", "comment")]
            self.nodes[label].succ = [self._seq(inner, nxt, ctx)]
            return label
        if t == "case_statement":
            # stray case label outside a switch body: treat its statements as a sequence
            return self._seq(_case_body(node), nxt, ctx)
        # preprocessor blocks, ERROR regions, anything else: not modeled
        self.unmodeled.update(range(self._line(node), self._last(node) + 1))
        logger.debug("unmodeled construct %s at line %d in %s", t, self._line(node), self.function.name)
        return nxt

    def _for(self, node: Node, nxt: int) -> int:
        line = self._line(node)
        init = node.child_by_field_name("initializer")
        cond = node.child_by_field_name("condition")
        update = node.child_by_field_name("update")
        c = self._new("condition", *(self._span(cond) if cond is not None else (line, line)))
        head = c
        if update is not None:
            head = self._new("update", *self._span(update), [c])
        body = self._build(node.child_by_field_name("body"), head, _Ctx(nxt, head))
        self.nodes[c].succ = [body, nxt] if cond is not None else [body]
        if init is not None:
            return self._new("init", *self._span(init), [c])
        return c

    def _span(self, node: Node) -> tuple[int, int]:
        return self._line(node), self._last(node)

    def _switch(self, node: Node, nxt: int, ctx: _Ctx) -> int:
        cond = node.child_by_field_name("condition")
        c = self._new("condition", *self._span(cond))
        body = node.child_by_field_name("body")
        cases = [ch for ch in body.named_children if ch.type == "case_statement"]
        inner = _Ctx(nxt, ctx.cont)
        follow = nxt
        labels = []
        has_default = False
        for case in reversed(cases):
            entry = self._seq(_case_body(case), follow, inner)
            label = self._new("case", self._line(case), self._line(case), [entry])
            labels.append(label)
            follow = label
            if case.child_by_field_name("value") is None:
                has_default = True
        labels.reverse()
        self.nodes[c].succ = labels + ([] if has_default else [nxt])
        return c

    # queries -------------------------------------------------------------

    def reachable_from(self, starts, include_start: bool = False, avoid=frozenset()) -> set[int]:
        seen: set[int] = set(starts) if include_start else set()
        queue = deque(starts)
        while queue:
            cur = queue.popleft()
            for nxt in self.nodes[cur].succ:
                if nxt in seen or nxt in avoid:
                    continue
                seen.add(nxt)
                queue.append(nxt)
        return seen

    def nodes_at(self, line: int) -> list[int]:
        exact = [n.id for n in self.nodes if n.first_line == line and n.kind != "exit"]
        if exact:
            return exact
        covering = [n for n in self.nodes if n.first_line <= line <= n.last_line and n.kind != "exit"]
        if not covering:
            return []
        width = min(n.last_line - n.first_line for n in covering)
        return [n.id for n in covering if n.last_line - n.first_line == width]

    def order(self, a: int, b: int) -> Order:
        if a in self.unmodeled or b in self.unmodeled:
            return Order.UNKNOWN
        at_a, at_b = self.nodes_at(a), self.nodes_at(b)
        if not at_a or not at_b:
            return Order.UNKNOWN
        if a == b:
            return Order.CANNOT_PRECEDE
        live_a = [n for n in at_a if n in self.entry_reachable]
        live_b = {n for n in at_b if n in self.entry_reachable}
        if not live_a or not live_b:
            return Order.CANNOT_PRECEDE
        if not live_b & self.reachable_from(live_a):
            return Order.CANNOT_PRECEDE
        if self.entry in at_a:
            dominated = True
        else:
            dodging = self.reachable_from([self.entry], include_start=True, avoid=frozenset(at_a))
            dominated = not (live_b & dodging)
        back = set(live_a) & self.reachable_from(sorted(live_b))
        if dominated and not back:
            return Order.MUST_PRECEDE
        return Order.MAY_PRECEDE


def _iter(node: Node):
    stack = [node]
    while stack:
        cur = stack.pop()
        yield cur
        stack.extend(reversed(cur.named_children))


def _case_body(case: Node) -> list[Node]:
    value = case.child_by_field_name("value")
    return [c for c in case.named_children if c != value and c.type != "comment"]


@lru_cache(maxsize=4096)
def control_flow_graph(function: FunctionRecord) -> ControlFlowGraph:
    return ControlFlowGraph(function)


def statement_precedes(function: FunctionRecord, a: SourceLocation, b: SourceLocation) -> Order:
    """Can the statement at ``a`` execute before the statement at ``b``?

    MustPrecede: every path reaching ``b`` passes ``a`` first and ``b`` never
    flows back to ``a``.  MayPrecede: some path runs ``a`` then ``b`` (branches
    or loops).  CannotPrecede: no path does, including ``a == b``.  Unknown:
    one of the lines has no modeled statement.
    """
    for loc in (a, b):
        if loc.file != function.file or not function.contains_line(loc.line):
            raise LocationOutsideFunction(f"{loc} is outside {function.name} {function.span}")
    verdict = control_flow_graph(function).order(a.line, b.line)
    if verdict is Order.UNKNOWN:
        logger.info("ordering of lines %d and %d in %s is unknown", a.line, b.line, function.name)
    return verdict
