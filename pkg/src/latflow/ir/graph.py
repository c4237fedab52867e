"""Dataflow graph values: operators, ports, edges, validation, isomorphism."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, List, Optional, Tuple, Union

import networkx as nx
from networkx.algorithms import isomorphism as iso

Port = Union[int, str]


class IRError(Exception):
    pass


class ArityError(IRError):
    pass


class UnknownOperator(IRError):
    pass


@dataclass(frozen=True)
class KindInfo:
    inputs: str  # "none" | "one" | "pair" | "many"
    outputs: str  # "none" | "one" | "named"
    params: Tuple[int, int]  # (min, max)


KINDS: Dict[str, KindInfo] = {
    "source_iter": KindInfo("none", "one", (1, 1)),
    "source_stream": KindInfo("none", "one", (1, 1)),
    "source_stream_serde": KindInfo("none", "one", (1, 1)),
    "map": KindInfo("one", "one", (1, 1)),
    "join": KindInfo("pair", "one", (0, 0)),
    "cross_join": KindInfo("pair", "one", (0, 0)),
    "group_by": KindInfo("one", "one", (2, 2)),
    "tee": KindInfo("one", "named", (0, 0)),
    "merge": KindInfo("many", "one", (0, 0)),
    "unique": KindInfo("one", "one", (0, 0)),
    "odiff": KindInfo("one", "one", (0, 0)),
    "append": KindInfo("one", "one", (0, 1)),
    "dest_sink_serde": KindInfo("one", "none", (1, 1)),
}

SOURCE_KINDS = frozenset(k for k, v in KINDS.items() if v.inputs == "none")
SINK_KINDS = frozenset(k for k, v in KINDS.items() if v.outputs == "none")


@dataclass(frozen=True)
class OperatorNode:
    id: str
    kind: str
    params: Tuple[Union[str, int], ...] = ()
    props: FrozenSet[str] = frozenset()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UnknownOperator(f"unknown operator {self.kind!r}")
        lo, hi = KINDS[self.kind].params
        if not lo <= len(self.params) <= hi:
            raise ArityError(f"{self.kind} takes {lo}..{hi} arguments, got {len(self.params)}")

    def render(self) -> str:
        return f"{self.kind}({', '.join(str(p) for p in self.params)})"


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    src_port: Optional[Port] = None
    dst_port: Optional[Port] = None


def check_src_port(node: OperatorNode, port: Optional[Port]) -> None:
    info = KINDS[node.kind]
    if info.outputs == "none":
        raise ArityError(f"{node.kind} {node.id} has no outputs")
    if info.outputs == "named" and port is None:
        raise ArityError(f"tee {node.id} outputs need a port name, e.g. name[port]")
    if info.outputs == "one" and port is not None:
        raise ArityError(f"{node.kind} {node.id} has a single unnamed output, got [{port}]")


def check_dst_port(node: OperatorNode, port: Optional[Port]) -> None:
    info = KINDS[node.kind]
    if info.inputs == "none":
        raise ArityError(f"{node.kind} {node.id} has no inputs")
    if info.inputs == "pair" and port not in (0, 1):
        raise ArityError(f"{node.kind} {node.id} inputs are [0] and [1], got {port!r}")
    if info.inputs in ("one", "many") and port is not None:
        raise ArityError(f"{node.kind} {node.id} takes no input port index, got [{port}]")


@dataclass(frozen=True)
class DataflowGraph:
    nodes: Tuple[OperatorNode, ...] = ()
    edges: Tuple[Edge, ...] = ()
    names: Tuple[Tuple[str, str], ...] = ()  # (binding name, head node id)

    @cached_property
    def _by_id(self) -> Dict[str, OperatorNode]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def _ins(self) -> Dict[str, List[Edge]]:
        out: Dict[str, List[Edge]] = {n.id: [] for n in self.nodes}
        for e in self.edges:
            out.setdefault(e.dst, []).append(e)
        return out

    @cached_property
    def _outs(self) -> Dict[str, List[Edge]]:
        out: Dict[str, List[Edge]] = {n.id: [] for n in self.nodes}
        for e in self.edges:
            out.setdefault(e.src, []).append(e)
        return out

    def node(self, node_id: str) -> OperatorNode:
        return self._by_id[node_id]

    def has_node(self, node_id: str) -> bool:
        return node_id in self._by_id

    def in_edges(self, node_id: str) -> List[Edge]:
        return self._ins.get(node_id, [])

    def out_edges(self, node_id: str) -> List[Edge]:
        return self._outs.get(node_id, [])

    def of_kind(self, *kinds: str) -> List[OperatorNode]:
        return [n for n in self.nodes if n.kind in kinds]

    def name_of(self, node_id: str) -> Optional[str]:
        for name, head in self.names:
            if head == node_id:
                return name
        return None

    def to_networkx(self) -> nx.MultiDiGraph:
        g = nx.MultiDiGraph()
        for n in self.nodes:
            g.add_node(n.id, kind=n.kind, params=n.params)
        for e in self.edges:
            g.add_edge(e.src, e.dst, ports=(e.src_port, e.dst_port))
        return g

    def topo_order(self) -> List[str]:
        """Kahn's algorithm, ties broken by node declaration order."""
        index = {n.id: i for i, n in enumerate(self.nodes)}
        indeg = {n.id: len(self.in_edges(n.id)) for n in self.nodes}
        ready = sorted((i for i, d in indeg.items() if d == 0), key=index.get)
        order = []
        while ready:
            nid = ready.pop(0)
            order.append(nid)
            for e in self.out_edges(nid):
                indeg[e.dst] -= 1
                if indeg[e.dst] == 0:
                    ready.append(e.dst)
                    ready.sort(key=index.get)
        if len(order) != len(self.nodes):
            raise IRError("graph has a cycle")
        return order

    def descendants(self, node_id: str) -> set:
        seen, stack = set(), [node_id]
        while stack:
            for e in self.out_edges(stack.pop()):
                if e.dst not in seen:
                    seen.add(e.dst)
                    stack.append(e.dst)
        return seen

    def ancestors(self, node_id: str) -> set:
        seen, stack = set(), [node_id]
        while stack:
            for e in self.in_edges(stack.pop()):
                if e.src not in seen:
                    seen.add(e.src)
                    stack.append(e.src)
        return seen

    def successor(self, node_id: str) -> Optional[OperatorNode]:
        outs = self.out_edges(node_id)
        return self.node(outs[0].dst) if len(outs) == 1 else None

    def predecessor(self, node_id: str) -> Optional[OperatorNode]:
        ins = self.in_edges(node_id)
        return self.node(ins[0].src) if len(ins) == 1 else None


# -- validation -------------------------------------------------------------

@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    where: Tuple[str, ...] = field(default=())


def validate_graph(g: DataflowGraph, registry=None) -> List[Diagnostic]:
    """One diagnostic per violated graph invariant; empty when the graph is well formed."""
    diags: List[Diagnostic] = []
    ids = [n.id for n in g.nodes]
    if len(set(ids)) != len(ids):
        diags.append(Diagnostic("DuplicateNodeId", "node ids are not unique"))
    for e in g.edges:
        if not (g.has_node(e.src) and g.has_node(e.dst)):
            diags.append(Diagnostic("DanglingEdge", f"edge {e.src}->{e.dst} names a missing node", (e.src, e.dst)))
    if diags:
        return diags

    for n in g.nodes:
        info = KINDS[n.kind]
        ins, outs = g.in_edges(n.id), g.out_edges(n.id)
        for e in ins:
            try:
                check_dst_port(n, e.dst_port)
            except ArityError as err:
                diags.append(Diagnostic("BadPort", str(err), (n.id,)))
        for e in outs:
            try:
                check_src_port(n, e.src_port)
            except ArityError as err:
                diags.append(Diagnostic("BadPort", str(err), (n.id,)))

        if info.inputs == "pair":
            for port in (0, 1):
                fed = [e for e in ins if e.dst_port == port]
                if not fed:
                    diags.append(Diagnostic("UnfedPort", f"{n.kind} {n.id} input [{port}] is unfed", (n.id,)))
                elif len(fed) > 1:
                    diags.append(Diagnostic("DuplicateInput", f"{n.kind} {n.id} input [{port}] fed twice", (n.id,)))
        elif info.inputs == "one":
            if not ins:
                diags.append(Diagnostic("UnfedPort", f"{n.kind} {n.id} input is unfed", (n.id,)))
            elif len(ins) > 1:
                diags.append(Diagnostic("DuplicateInput", f"{n.kind} {n.id} has {len(ins)} inputs; use merge()", (n.id,)))
        elif info.inputs == "many" and not ins:
            diags.append(Diagnostic("UnfedPort", f"merge {n.id} has no inputs", (n.id,)))

        if info.outputs == "one":
            if not outs:
                diags.append(Diagnostic("DanglingOutput", f"{n.kind} {n.id} output goes nowhere", (n.id,)))
            elif len(outs) > 1:
                diags.append(Diagnostic("FanOutWithoutTee", f"{n.kind} {n.id} feeds {len(outs)} consumers; use tee()", (n.id,)))
        elif info.outputs == "named":
            if not outs:
                diags.append(Diagnostic("DanglingOutput", f"tee {n.id} has no outputs", (n.id,)))
            ports = [e.src_port for e in outs]
            for p in set(ports):
                if ports.count(p) > 1:
                    diags.append(Diagnostic("FanOutWithoutTee", f"tee {n.id} port [{p}] used twice", (n.id,)))

        if registry is not None and n.kind == "group_by":
            diags.extend(_check_group_by(n, registry))

    try:
        g.topo_order()
    except IRError:
        cyc = nx.find_cycle(g.to_networkx())
        diags.append(Diagnostic("CycleDetected", "graph has a cycle", tuple(u for u, *_ in cyc)))
    return diags


def _check_group_by(n: OperatorNode, registry) -> List[Diagnostic]:
    from ..lattice import bp_bottom, ssiv_bottom

    init, merge = n.params
    if init not in registry or merge not in registry:
        return []
    ispec, mspec = registry.get(init), registry.get(merge)
    if mspec.role == "merge":
        bottom = {"bp": bp_bottom(), "ssiv": ssiv_bottom()}.get(mspec.lattice)
        if bottom is None or ispec.fn() != bottom:
            return [Diagnostic("BadGroupByInit", f"group_by {n.id}: {init} is not the bottom of {merge}", (n.id,))]
    return []


# -- isomorphism ------------------------------------------------------------

def graphs_isomorphic(a: DataflowGraph, b: DataflowGraph, ignore_params: bool = False) -> bool:
    """Structural equality ignoring node ids (and binding names)."""
    if len(a.nodes) != len(b.nodes) or len(a.edges) != len(b.edges):
        return False
    ga, gb = a.to_networkx(), b.to_networkx()
    attrs = ["kind"] if ignore_params else ["kind", "params"]
    return nx.is_isomorphic(
        ga, gb,
        node_match=iso.categorical_node_match(attrs, [None] * len(attrs)),
        edge_match=iso.categorical_multiedge_match("ports", None),
    )
