"""Parser and canonical printer for the ``.hfs`` pipeline language.

A program is a list of ``;``-terminated statements.  A statement is a pipeline
of operators joined by ``->``, optionally bound to a name::

    source_stream(shopping) -> [0]lookup_class;
    source_iter(client_class) -> [1]lookup_class;
    lookup_class = join() -> map(fmt_kv) -> group_by(vec_bot, vec_push)
      -> map(tag_out_addr) -> dest_sink_serde(out);

A name used on the receiving side of ``->`` denotes the first operator of its
pipeline (``[0]lookup_class`` is input 0 of the join); on the sending side it
denotes the last one (``lookup_class[clients]`` is the tee's ``clients``
output).  Names may be used before they are bound.  ``#`` and ``//`` start
comments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .graph import (
    KINDS,
    ArityError,
    DataflowGraph,
    Edge,
    IRError,
    OperatorNode,
    UnknownOperator,
    check_dst_port,
    check_src_port,
)


class ParseError(IRError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.line = line
        self.col = col


_TOKEN = re.compile(
    r"(?P<ws>\s+)|(?P<comment>(?://|\#)[^\n]*)|(?P<arrow>->)|(?P<int>-?\d+)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<punct>[=;()\[\],])"
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> List[_Tok]:
    toks, pos, line, line_start = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        chunk = m.group()
        if "\n" in chunk:
            line += chunk.count("\n")
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    return toks


@dataclass
class _Element:
    line: int
    col: int
    name: str
    args: Optional[List] = None  # None for a name reference
    in_port: object = None
    out_port: object = None
    node_id: Optional[str] = None


@dataclass
class _Stmt:
    binding: Optional[str]
    elements: List[_Element] = field(default_factory=list)


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, offset: int = 0) -> Optional[_Tok]:
        j = self.i + offset
        return self.toks[j] if j < len(self.toks) else None

    def at(self, text: str, offset: int = 0) -> bool:
        t = self.peek(offset)
        return t is not None and t.text == text and t.kind in ("punct", "arrow")

    def take(self, kind: str = None, text: str = None) -> _Tok:
        t = self.peek()
        if t is None:
            last = self.toks[-1] if self.toks else _Tok("", "", 1, 1)
            raise ParseError(f"unexpected end of input, expected {text or kind}", last.line, last.col)
        if (kind and t.kind != kind) or (text and t.text != text):
            raise ParseError(f"expected {text or kind}, found {t.text!r}", t.line, t.col)
        self.i += 1
        return t

    def port(self):
        self.take(text="[")
        t = self.peek()
        if t is None or t.kind not in ("int", "ident"):
            raise ParseError("expected a port index or name", *(t.line, t.col) if t else (0, 0))
        self.i += 1
        self.take(text="]")
        return int(t.text) if t.kind == "int" else t.text

    def program(self) -> List[_Stmt]:
        stmts = []
        while self.peek() is not None:
            binding = None
            if self.peek().kind == "ident" and self.at("=", 1):
                binding = self.take("ident").text
                self.take(text="=")
            stmt = _Stmt(binding)
            stmt.elements.append(self.element())
            while self.at("->"):
                self.take(text="->")
                stmt.elements.append(self.element())
            self.take(text=";")
            stmts.append(stmt)
        return stmts

    def element(self) -> _Element:
        in_port = self.port() if self.at("[") else None
        t = self.take("ident")
        el = _Element(t.line, t.col, t.text, in_port=in_port)
        if self.at("("):
            self.take(text="(")
            el.args = []
            while not self.at(")"):
                a = self.peek()
                if a is None or a.kind not in ("int", "ident"):
                    raise ParseError("expected an argument name or integer", *(a.line, a.col) if a else (0, 0))
                self.i += 1
                el.args.append(int(a.text) if a.kind == "int" else a.text)
                if not self.at(")"):
                    self.take(text=",")
            self.take(text=")")
        if self.at("["):
            el.out_port = self.port()
        return el


def parse_dsl(text: str) -> DataflowGraph:
    stmts = _Parser(text).program()
    nodes: List[OperatorNode] = []
    bindings: Dict[str, _Stmt] = {}
    for stmt in stmts:
        if stmt.binding is not None:
            if stmt.binding in bindings:
                raise ParseError(f"name {stmt.binding!r} bound twice", stmt.elements[0].line, stmt.elements[0].col)
            if stmt.binding in KINDS:
                raise ParseError(f"name {stmt.binding!r} shadows an operator", stmt.elements[0].line, stmt.elements[0].col)
            bindings[stmt.binding] = stmt
        for pos, el in enumerate(stmt.elements):
            if el.in_port is not None and pos == 0:
                raise ParseError("input port on the first element of a pipeline", el.line, el.col)
            if el.out_port is not None and pos == len(stmt.elements) - 1:
                raise ParseError("output port on the last element of a pipeline", el.line, el.col)
            if el.args is None:
                continue
            if el.name not in KINDS:
                raise UnknownOperator(f"{el.line}:{el.col}: unknown operator {el.name!r}")
            el.node_id = f"n{len(nodes)}"
            try:
                nodes.append(OperatorNode(el.node_id, el.name, tuple(el.args)))
            except ArityError as err:
                raise ArityError(f"{el.line}:{el.col}: {err}") from None

    by_id = {n.id: n for n in nodes}

    def resolve(el: _Element, side: str, seen=()) -> str:
        if el.node_id is not None:
            return el.node_id
        if el.name not in bindings:
            raise ParseError(f"undefined name {el.name!r}", el.line, el.col)
        if el.name in seen:
            raise ParseError(f"name {el.name!r} is defined in terms of itself", el.line, el.col)
        elems = bindings[el.name].elements
        return resolve(elems[0] if side == "head" else elems[-1], side, seen + (el.name,))

    edges: List[Edge] = []
    for stmt in stmts:
        for a, b in zip(stmt.elements, stmt.elements[1:]):
            src, dst = resolve(a, "tail"), resolve(b, "head")
            try:
                check_src_port(by_id[src], a.out_port)
                check_dst_port(by_id[dst], b.in_port)
            except ArityError as err:
                raise ArityError(f"{b.line}:{b.col}: {err}") from None
            edges.append(Edge(src, dst, a.out_port, b.in_port))

    names = tuple((name, resolve(stmt.elements[0], "head")) for name, stmt in bindings.items())
    return DataflowGraph(tuple(nodes), tuple(edges), names)


# -- canonical printer ------------------------------------------------------

def _port(p) -> str:
    return "" if p is None else f"[{p}]"


def serialize_graph(g: DataflowGraph) -> str:
    """Canonical program text; one statement per line, ordered by node declaration."""
    pos = {n.id: i for i, n in enumerate(g.nodes)}

    nxt: Dict[str, str] = {}
    for n in g.nodes:
        outs = g.out_edges(n.id)
        if len(outs) != 1 or outs[0].src_port is not None or outs[0].dst_port is not None:
            continue
        v = outs[0].dst
        if len(g.in_edges(v)) == 1 and KINDS[g.node(v).kind].inputs == "one":
            nxt[n.id] = v
    targets = set(nxt.values())
    chains: List[List[str]] = []
    for n in g.nodes:
        if n.id in targets:
            continue
        chain = [n.id]
        while chain[-1] in nxt:
            chain.append(nxt[chain[-1]])
        chains.append(chain)
    chains.sort(key=lambda c: pos[c[0]])

    def inline(chain) -> bool:
        return not g.in_edges(chain[0]) and len(g.out_edges(chain[-1])) <= 1

    used = {name for name, _ in g.names}
    chain_name: Dict[str, str] = {}
    counter = 0
    for chain in chains:
        if inline(chain):
            continue
        name = g.name_of(chain[0])
        while name is None or (name in chain_name.values()):
            name = f"{g.node(chain[0]).kind}_{counter}"
            counter += 1
            if name in used:
                name = None
        chain_name[chain[0]] = name
    head_of = {nid: chain[0] for chain in chains for nid in chain}

    def body(chain) -> str:
        return " -> ".join(g.node(nid).render() for nid in chain)

    lines = []
    for chain in chains:
        tail_outs = g.out_edges(chain[-1])
        if inline(chain):
            text = body(chain)
            if tail_outs:
                e = tail_outs[0]
                text += f"{_port(e.src_port)} -> {_port(e.dst_port)}{chain_name[head_of[e.dst]]}"
            lines.append(text + ";")
            continue
        name = chain_name[chain[0]]
        lines.append(f"{name} = {body(chain)};")
        for e in tail_outs:
            lines.append(f"{name}{_port(e.src_port)} -> {_port(e.dst_port)}{chain_name[head_of[e.dst]]};")
    return "\n".join(lines) + ("\n" if lines else "")
