"""Which edges may be turned into network edges.

Each operator is classified from its kind and the declared properties of the
functions it names.  An edge is safe to cut when nothing downstream of it,
following local edges and channels alike, depends on arrival order,
batching, or multiplicity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

from ..ir.deploy import Deployment, Endpoint
from ..ir.graph import SINK_KINDS, SOURCE_KINDS, OperatorNode
from ..registry import FunctionRegistry, UnknownFunction, default_registry


class UnknownFunctionProperties(Exception):
    pass


class OpClass(Enum):
    LATTICE_MORPHISM = "LatticeMorphism"
    MONOTONE_LATTICE = "MonotoneLattice"
    ORDER_DEPENDENT = "OrderDependent"
    SOURCE = "Source"
    SINK = "Sink"


SAFE_CLASSES = {OpClass.LATTICE_MORPHISM, OpClass.MONOTONE_LATTICE, OpClass.SOURCE, OpClass.SINK}


def _spec(registry: FunctionRegistry, name: str, op: OperatorNode):
    try:
        spec = registry.get(name)
    except UnknownFunction:
        raise UnknownFunctionProperties(f"{op.id}: function {name!r} is not registered") from None
    if spec.pure is None:
        raise UnknownFunctionProperties(f"{op.id}: function {name!r} declares no algebraic properties")
    return spec


def classify(op: OperatorNode, registry: FunctionRegistry) -> OpClass:
    if op.kind in SOURCE_KINDS:
        return OpClass.SOURCE
    if op.kind in SINK_KINDS:
        return OpClass.SINK
    if op.kind == "map":
        # a pure function applied record by record commutes with set union
        spec = _spec(registry, op.params[0], op)
        return OpClass.LATTICE_MORPHISM if spec.pure else OpClass.ORDER_DEPENDENT
    if op.kind in ("join", "cross_join", "tee", "merge"):
        return OpClass.LATTICE_MORPHISM
    if op.kind in ("unique", "odiff"):
        return OpClass.MONOTONE_LATTICE
    if op.kind == "group_by":
        init, merge = op.params
        _spec(registry, init, op)
        spec = _spec(registry, merge, op)
        return OpClass.MONOTONE_LATTICE if spec.role == "merge" else OpClass.ORDER_DEPENDENT
    if op.kind == "append":
        return OpClass.ORDER_DEPENDENT
    raise UnknownFunctionProperties(f"{op.id}: no classification for kind {op.kind}")


@dataclass(frozen=True)
class EdgeRef:
    node: str
    src: str
    dst: str
    src_port: object = None
    dst_port: object = None


@dataclass(frozen=True)
class Verdict:
    safe: bool
    path: Tuple[str, ...] = ()  # for unsafe edges: operators from the edge down to the offender

    def __str__(self) -> str:
        return "Safe" if self.safe else "Unsafe(" + " -> ".join(self.path) + ")"


@dataclass
class MonotonicityReport:
    ops: Dict[Tuple[str, str], OpClass] = field(default_factory=dict)
    edges: Dict[EdgeRef, Verdict] = field(default_factory=dict)
    channels: Dict[str, Verdict] = field(default_factory=dict)

    def edge(self, node: str, src: str, dst: str) -> Verdict:
        for ref, verdict in self.edges.items():
            if (ref.node, ref.src, ref.dst) == (node, src, dst):
                return verdict
        raise KeyError((node, src, dst))

    def all_safe(self) -> bool:
        return all(v.safe for v in self.edges.values()) and all(v.safe for v in self.channels.values())


def analyze_monotonicity(d: Deployment, registry: Optional[FunctionRegistry] = None) -> MonotonicityReport:
    registry = registry or default_registry()
    report = MonotonicityReport()
    graphs = {n.name: n.graph for n in d.nodes}
    for n in d.nodes:
        for op in n.graph.nodes:
            report.ops[(n.name, op.id)] = classify(op, registry)

    # sink endpoint -> consumer (node, op id) across channels
    consumers_of: Dict[Endpoint, list] = {}
    for c in d.channels:
        targets = []
        for ep in c.consumers:
            g = graphs.get(ep.node)
            if g is None:
                continue
            targets += [(ep.node, op.id) for op in g.of_kind("source_stream_serde") if op.params[0] == ep.name]
        for p in c.producers:
            consumers_of.setdefault(p, []).extend(targets)

    memo: Dict[Tuple[str, str], Optional[Tuple[str, ...]]] = {}

    def offender(node: str, op_id: str, visiting=frozenset()) -> Optional[Tuple[str, ...]]:
        """Path from (node, op) to the first order-dependent operator downstream, or None."""
        key = (node, op_id)
        if key in memo:
            return memo[key]
        if key in visiting:
            return None
        op = graphs[node].node(op_id)
        label = f"{node}:{op_id}:{op.render()}"
        if report.ops[key] not in SAFE_CLASSES:
            memo[key] = (label,)
            return memo[key]
        nexts = [(node, e.dst) for e in graphs[node].out_edges(op_id)]
        if op.kind == "dest_sink_serde":
            nexts += consumers_of.get(Endpoint(node, op.params[0]), [])
        result = None
        for nxt in nexts:
            sub = offender(*nxt, visiting | {key})
            if sub is not None:
                result = (label,) + sub
                break
        memo[key] = result
        return result

    for n in d.nodes:
        for e in n.graph.edges:
            bad = offender(n.name, e.dst)
            report.edges[EdgeRef(n.name, e.src, e.dst, e.src_port, e.dst_port)] = Verdict(bad is None, bad or ())
    for c in d.channels:
        bad = None
        for ep in c.consumers:
            for op in graphs[ep.node].of_kind("source_stream_serde") if ep.node in graphs else ():
                if op.params[0] == ep.name and bad is None:
                    bad = offender(ep.node, op.id)
        report.channels[c.name] = Verdict(bad is None, bad or ())
    return report
