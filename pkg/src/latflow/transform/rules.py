"""The rewrite catalogue.

Every rule is pure: it checks its precondition, raises
:class:`PreconditionFailed` if the pattern is absent, and otherwise returns a
new graph or deployment.  Nothing is rewritten in place.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from ..ir.deploy import (
    ChannelSpec,
    Deployment,
    Endpoint,
    FunctionalDependency,
    NodeSpec,
    freeze_env,
)
from ..ir.graph import DataflowGraph, Edge, OperatorNode
from ..registry import LATTICE_PAIRS, FunctionRegistry, UnknownFunction, default_registry
from .analysis import OpClass, analyze_monotonicity, classify


class TransformError(Exception):
    pass


class PreconditionFailed(TransformError):
    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


class UnsafeCut(TransformError):
    def __init__(self, path: Sequence[str]):
        super().__init__("edge is not safe to cut: " + " -> ".join(path))
        self.path = tuple(path)


# -- graph editing ----------------------------------------------------------

class GraphEditor:
    def __init__(self, g: DataflowGraph):
        self.nodes: Dict[str, OperatorNode] = {n.id: n for n in g.nodes}
        self.edges: List[Edge] = list(g.edges)
        self.names = list(g.names)
        self._next = 1 + max((int(i[1:]) for i in self.nodes if i[1:].isdigit()), default=-1)

    def add(self, kind: str, *params) -> str:
        nid = f"n{self._next}"
        self._next += 1
        self.nodes[nid] = OperatorNode(nid, kind, tuple(params))
        return nid

    def set_params(self, nid: str, *params) -> None:
        self.nodes[nid] = replace(self.nodes[nid], params=tuple(params))

    def remove(self, nid: str) -> None:
        del self.nodes[nid]
        self.edges = [e for e in self.edges if nid not in (e.src, e.dst)]

    def connect(self, src: str, dst: str, src_port=None, dst_port=None) -> None:
        self.edges.append(Edge(src, dst, src_port, dst_port))

    def disconnect(self, edge: Edge) -> None:
        self.edges.remove(edge)

    def ins(self, nid: str) -> List[Edge]:
        return [e for e in self.edges if e.dst == nid]

    def outs(self, nid: str) -> List[Edge]:
        return [e for e in self.edges if e.src == nid]

    def splice_out(self, nid: str) -> None:
        """Remove a one-in/one-out node, joining its neighbours."""
        (i,), (o,) = self.ins(nid), self.outs(nid)
        self.remove(nid)
        self.connect(i.src, o.dst, i.src_port, o.dst_port)

    def insert_on(self, edge: Edge, *chain: str) -> None:
        """Route ``edge`` through the already-added nodes in ``chain``."""
        self.disconnect(edge)
        prev, port = edge.src, edge.src_port
        for nid in chain:
            self.connect(prev, nid, port, None)
            prev, port = nid, None
        self.connect(prev, edge.dst, None, edge.dst_port)

    def build(self) -> DataflowGraph:
        names = tuple((n, h) for n, h in self.names if h in self.nodes)
        return DataflowGraph(tuple(self.nodes.values()), tuple(self.edges), names)


def subgraph(g: DataflowGraph, keep: set) -> DataflowGraph:
    return DataflowGraph(
        tuple(n for n in g.nodes if n.id in keep),
        tuple(e for e in g.edges if e.src in keep and e.dst in keep),
        tuple((n, h) for n, h in g.names if h in keep),
    )


# -- static helpers ---------------------------------------------------------

def _spec(registry: FunctionRegistry, name):
    try:
        return registry.get(name)
    except UnknownFunction:
        return None


def is_lattice_group_by(op: OperatorNode, registry: FunctionRegistry) -> bool:
    if op.kind != "group_by":
        return False
    spec = _spec(registry, op.params[1])
    return spec is not None and spec.role == "merge"


def carried_lattice(g: DataflowGraph, nid: str, registry: FunctionRegistry) -> Optional[str]:
    """``bp``/``ssiv`` when the output of ``nid`` is statically known to carry that lattice."""
    op = g.node(nid)
    if op.kind == "source_stream":
        for suffix in ("bp", "ssiv"):
            if str(op.params[0]).endswith("_" + suffix):
                return suffix
        return None
    if op.kind == "group_by":
        spec = _spec(registry, op.params[1])
        return spec.lattice if spec is not None and spec.role == "merge" else None
    if op.kind == "append":
        return "bp"
    if op.kind == "odiff":
        return "ssiv"
    inherit = op.kind in ("unique", "merge", "tee")
    if op.kind == "map":
        spec = _spec(registry, op.params[0])
        inherit = spec is not None and spec.pointwise
    if inherit:
        kinds = {carried_lattice(g, e.src, registry) for e in g.in_edges(nid)}
        return kinds.pop() if len(kinds) == 1 else None
    return None


def _find_edge(g: DataflowGraph, src: str, dst: str) -> Edge:
    for e in g.edges:
        if e.src == src and e.dst == dst:
            return e
    raise PreconditionFailed("EdgeNotFound", f"no edge {src} -> {dst}")


# -- type upgrades ----------------------------------------------------------

def _upgrade(g: DataflowGraph, registry, accept: Callable, from_suffix: str, to: str) -> DataflowGraph:
    targets = [op for op in g.of_kind("group_by") if accept(op)]
    if not targets:
        raise PreconditionFailed("NoMatch", f"no group_by eligible for an upgrade to {to}")
    if len(targets) > 1:
        raise PreconditionFailed("Ambiguous", f"{len(targets)} group_by operators eligible")
    gb = targets[0]
    sources = [
        g.node(a) for a in sorted(g.ancestors(gb.id))
        if g.node(a).kind == "source_stream" and carried_lattice(g, a, registry) is None
    ] if from_suffix == "" else [
        g.node(a) for a in sorted(g.ancestors(gb.id))
        if g.node(a).kind == "source_stream" and str(g.node(a).params[0]).endswith(from_suffix)
    ]
    if len(sources) != 1:
        raise PreconditionFailed("NoSessionizedSource", f"need exactly one re-typeable stream source above {gb.id}")
    src = sources[0]
    base = str(src.params[0])[: len(str(src.params[0])) - len(from_suffix)] if from_suffix else str(src.params[0])
    ed = GraphEditor(g)
    ed.set_params(src.id, f"{base}_{to}")
    ed.set_params(gb.id, *LATTICE_PAIRS[to])
    return ed.build()


def upgrade_to_bp(g: DataflowGraph, registry: Optional[FunctionRegistry] = None) -> DataflowGraph:
    """Sequence-append fold over a raw stream -> bounded-prefix lattice group_by over sessions."""
    registry = registry or default_registry()

    def accept(op):
        spec = _spec(registry, op.params[1])
        return spec is not None and spec.role == "fold" and spec.meta.get("seq_append")

    return _upgrade(g, registry, accept, "", "bp")


def upgrade_to_ssiv(g: DataflowGraph, registry: Optional[FunctionRegistry] = None) -> DataflowGraph:
    registry = registry or default_registry()

    def accept(op):
        return tuple(op.params) == LATTICE_PAIRS["bp"]

    return _upgrade(g, registry, accept, "_bp", "ssiv")


# -- odiff / append ---------------------------------------------------------

def insert_odiff_append(g: DataflowGraph, edge: Tuple[str, str], registry: Optional[FunctionRegistry] = None) -> DataflowGraph:
    """``P -> Q`` over bounded prefixes becomes ``P -> odiff -> append -> Q``."""
    registry = registry or default_registry()
    e = _find_edge(g, *edge)
    if carried_lattice(g, e.src, registry) != "bp":
        raise PreconditionFailed("NotBoundedPrefix", f"edge {e.src} -> {e.dst} does not carry bounded prefixes")
    ed = GraphEditor(g)
    od, ap = ed.add("odiff"), ed.add("append")
    ed.insert_on(e, od, ap)
    return ed.build()


def edge_arg(text: str) -> Tuple[str, str]:
    src, sep, dst = text.partition("->")
    if not sep:
        raise PreconditionFailed("BadArgument", f"edge must look like SRC->DST, got {text!r}")
    return src.strip(), dst.strip()


def insert_odiff_append_in(
    d: Deployment, edge: str, node: Optional[str] = None, registry: Optional[FunctionRegistry] = None
) -> Deployment:
    """Deployment form: ``edge`` is ``SRC->DST`` inside ``node``, or a channel name (always refused)."""
    if "->" not in edge:
        if edge in {c.name for c in d.channels}:
            raise PreconditionFailed(
                "NetworkEdge", f"channel {edge} may reorder or duplicate; odiff/append need an ordered exactly-once edge"
            )
        raise PreconditionFailed("EdgeNotFound", edge)
    spec = _only_node(d, node)
    return d.with_node(replace(spec, graph=insert_odiff_append(spec.graph, edge_arg(edge), registry)))


def push_through_odiff(g: DataflowGraph, registry: Optional[FunctionRegistry] = None) -> DataflowGraph:
    """``odiff -> ... -> append -> map(f)`` becomes ``odiff -> ... -> map(f) -> append`` for item-wise f."""
    registry = registry or default_registry()
    for ap in g.of_kind("append"):
        q = g.successor(ap.id)
        if q is None or q.kind != "map":
            continue
        spec = _spec(registry, q.params[0])
        if spec is None or not spec.pointwise:
            raise PreconditionFailed("NotPointwise", f"map({q.params[0]}) is not declared item-wise")
        _require_local_run_from_odiff(g, ap.id, registry)
        ed = GraphEditor(g)
        (into_ap,), (ap_q,), (q_out,) = ed.ins(ap.id), ed.outs(ap.id), ed.outs(q.id)
        for e in (into_ap, ap_q, q_out):
            ed.disconnect(e)
        ed.connect(into_ap.src, q.id, into_ap.src_port, None)
        ed.connect(q.id, ap.id)
        ed.connect(ap.id, q_out.dst, None, q_out.dst_port)
        return ed.build()
    raise PreconditionFailed("NoMatch", "no append followed by a map")


def _require_local_run_from_odiff(g: DataflowGraph, append_id: str, registry) -> None:
    """Everything between odiff and append must be item-wise maps on local edges."""
    cur = g.predecessor(append_id)
    while cur is not None and cur.kind != "odiff":
        spec = _spec(registry, cur.params[0]) if cur.kind == "map" else None
        if spec is None or not spec.pointwise:
            raise PreconditionFailed("NotOrderedRun", f"{cur.id} {cur.kind} sits between odiff and append")
        cur = g.predecessor(cur.id)
    if cur is None:
        raise PreconditionFailed("NotOrderedRun", f"append {append_id} is not fed by an odiff on local edges")


def fuse_append(g: DataflowGraph, registry: Optional[FunctionRegistry] = None) -> DataflowGraph:
    """Delete an append whose consumer is a lattice group_by that reassembles indexed items itself."""
    registry = registry or default_registry()
    for ap in g.of_kind("append"):
        q = g.successor(ap.id)
        if q is None or not is_lattice_group_by(q, registry):
            continue
        if not registry.get(q.params[1]).meta.get("reassembles"):
            raise PreconditionFailed("NoReassembly", f"group_by({', '.join(map(str, q.params))}) cannot absorb indexed items")
        ed = GraphEditor(g)
        ed.splice_out(ap.id)
        return ed.build()
    raise PreconditionFailed("NoMatch", "no append feeding a lattice group_by")


# -- group_by pushdown --------------------------------------------------------

def push_groupby_through_join(
    g: DataflowGraph,
    fd: Optional[FunctionalDependency],
    schemas: Optional[Dict[str, Tuple[str, ...]]] = None,
    registry: Optional[FunctionRegistry] = None,
) -> DataflowGraph:
    """``join -> map(rearrange) -> group_by`` becomes ``group_by -> [0]join -> map(rearrange)``.

    Licensed by an FD from the join key to the table-side attributes that the
    rearranging map folds into the group key.
    """
    registry = registry or default_registry()
    schemas = schemas or {}
    for join in g.of_kind("join"):
        m = g.successor(join.id)
        if m is None or m.kind != "map":
            continue
        gb = g.successor(m.id)
        if gb is None or not is_lattice_group_by(gb, registry):
            continue
        if fd is None:
            raise PreconditionFailed("MissingFD", "no functional dependency annotation")
        meta = (_spec(registry, m.params[0]) or None)
        meta = meta.meta if meta else {}
        if meta.get("key_parts") != ("key", "right") or meta.get("value_part") != "left":
            raise PreconditionFailed("KeyMismatch", f"map({m.params[0]}) does not key by (join key, table attrs)")
        table_in = [e for e in g.in_edges(join.id) if e.dst_port == 1]
        stream_in = [e for e in g.in_edges(join.id) if e.dst_port == 0]
        if len(table_in) != 1 or len(stream_in) != 1:
            raise PreconditionFailed("NoMatch", f"join {join.id} inputs are not both fed")
        table = g.node(table_in[0].src)
        relation = str(table.params[0]) if table.kind in ("source_iter", "source_stream") else None
        if relation != fd.relation:
            raise PreconditionFailed("MissingFD", f"no FD on the joined table {relation}")
        attrs = schemas.get(relation)
        if not attrs:
            raise PreconditionFailed("MissingSchema", f"no schema for {relation}")
        join_key, rest = attrs[0], tuple(attrs[1:])
        if tuple(fd.determinant) != (join_key,) or set(fd.dependent) != set(rest):
            raise PreconditionFailed(
                "KeyMismatch", f"group key ({join_key}, {', '.join(rest)}) is not determined by FD {fd}"
            )
        ed = GraphEditor(g)
        ed.splice_out(gb.id)
        new_gb = ed.add("group_by", *gb.params)
        ed.insert_on(stream_in[0], new_gb)
        return ed.build()
    raise PreconditionFailed("NoMatch", "no join -> map -> lattice group_by chain")


# -- sub-aggregation elision ------------------------------------------------

def elide_subaggregation(g: DataflowGraph, registry: Optional[FunctionRegistry] = None) -> DataflowGraph:
    """Drop a lattice group_by when a later one with the same merge re-aggregates everything it produced."""
    registry = registry or default_registry()
    gbs = [g.node(i) for i in g.topo_order() if is_lattice_group_by(g.node(i), registry)]
    for first in gbs:
        for second in gbs:
            if second.id == first.id or first.params != second.params:
                continue
            if second.id not in g.descendants(first.id):
                continue
            between = g.descendants(first.id) & g.ancestors(second.id)
            if all(classify(g.node(b), registry) == OpClass.LATTICE_MORPHISM for b in between):
                ed = GraphEditor(g)
                ed.splice_out(first.id)
                return ed.build()
    raise PreconditionFailed("NoMatch", "no pair of same-lattice group_by operators joined by morphisms only")


# -- decoupling -------------------------------------------------------------

def _only_node(d: Deployment, node: Optional[str]) -> NodeSpec:
    if node is not None:
        try:
            return d.node(node)
        except KeyError:
            raise PreconditionFailed("NoSuchNode", node) from None
    if len(d.nodes) != 1:
        raise PreconditionFailed("Ambiguous", "deployment has several nodes; name one")
    return d.nodes[0]


def cut_flow(
    d: Deployment,
    placement: str = "Upstream",
    *,
    node: Optional[str] = None,
    edge: Optional[Tuple[str, str]] = None,
    channel: Optional[str] = None,
    upstream_node: str = "client",
    force: bool = False,
    registry: Optional[FunctionRegistry] = None,
) -> Deployment:
    """Split one node in two across a new adversarial network channel.

    ``placement`` picks the edge above (``Upstream``) or below
    (``Downstream``) the node's group_by unless ``edge`` names one.
    Everything upstream of the edge moves to ``upstream_node``.  ``force``
    skips the safety check and exists for negative tests only.
    """
    registry = registry or default_registry()
    spec = _only_node(d, node)
    g = spec.graph
    if placement not in ("Upstream", "Downstream"):
        raise PreconditionFailed("BadPlacement", placement)
    if edge is None:
        gbs = g.of_kind("group_by")
        if len(gbs) != 1:
            raise PreconditionFailed("Ambiguous", f"{len(gbs)} group_by operators; name the edge")
        edges = g.in_edges(gbs[0].id) if placement == "Upstream" else g.out_edges(gbs[0].id)
        if len(edges) != 1:
            raise PreconditionFailed("EdgeNotFound", f"group_by {gbs[0].id} has no single {placement.lower()} edge")
        e = edges[0]
    else:
        e = _find_edge(g, *edge)
    if upstream_node in d.node_names():
        raise PreconditionFailed("NameTaken", upstream_node)

    verdict = analyze_monotonicity(d, registry).edge(spec.name, e.src, e.dst)
    if not verdict.safe and not force:
        raise UnsafeCut(verdict.path)

    up = g.ancestors(e.src) | {e.src}
    leaving = [x for x in g.edges if x.src in up and x.dst not in up]
    if leaving != [e]:
        raise PreconditionFailed("NotSeparable", f"{len(leaving)} edges leave the upstream part")

    ch = channel or ("reqs" if placement == "Upstream" else "basic")
    ch_out, ch_in = f"{ch}_out", f"{ch}_in"

    ued = GraphEditor(subgraph(g, up))
    tag, sink = ued.add("map", "tag_server"), ued.add("dest_sink_serde", ch_out)
    ued.connect(e.src, tag, e.src_port, None)
    ued.connect(tag, sink)

    ded = GraphEditor(subgraph(g, set(n.id for n in g.nodes) - up))
    src, untag = ded.add("source_stream_serde", ch_in), ded.add("map", "untag")
    ded.connect(src, untag)
    ded.connect(untag, e.dst, None, e.dst_port)

    client = NodeSpec(upstream_node, ued.build(), freeze_env({"servers": [spec.name], "route_seed": 0}))
    server = replace(spec, graph=ded.build())
    moved = {op.params[0] for op in client.graph.of_kind("dest_sink_serde", "source_stream_serde")}

    def remap(eps):
        return tuple(Endpoint(upstream_node, p.name) if p.node == spec.name and p.name in moved else p for p in eps)

    channels = tuple(replace(c, producers=remap(c.producers), consumers=remap(c.consumers)) for c in d.channels)
    channels += (ChannelSpec(ch, (Endpoint(upstream_node, ch_out),), (Endpoint(spec.name, ch_in),), "network"),)
    nodes = []
    for n in d.nodes:
        nodes += [client, server] if n.name == spec.name else [n]
    return replace(d, nodes=tuple(nodes), channels=channels)


# -- replication ------------------------------------------------------------

def replicate_with_broadcast(
    d: Deployment,
    node: str = "server",
    replicas: int = 2,
    membership: Optional[Sequence[str]] = None,
    route_seed: int = 0,
    registry: Optional[FunctionRegistry] = None,
) -> Deployment:
    """Replace ``node`` by ``replicas`` copies that broadcast their carts to each other."""
    registry = registry or default_registry()
    spec = _only_node(d, node)
    g = spec.graph
    members = list(membership) if membership else [f"{node}_{i}" for i in range(replicas)]
    if len(members) != replicas or replicas < 1 or len(set(members)) != len(members):
        raise PreconditionFailed("BadMembership", f"{members} for {replicas} replicas")
    clash = set(members) & (set(d.node_names()) - {node})
    if clash:
        raise PreconditionFailed("NameTaken", ", ".join(sorted(clash)))
    for op in g.nodes:
        cls = classify(op, registry)
        if cls == OpClass.ORDER_DEPENDENT:
            raise PreconditionFailed("OrderDependentState", f"{op.id} {op.render()} cannot be replicated")
    lattice_params = {op.params for op in g.nodes if is_lattice_group_by(op, registry)}
    if len(lattice_params) != 1:
        raise PreconditionFailed("NoLatticeState", "node must hold exactly one kind of lattice group_by state")
    (params,) = lattice_params

    external = {p.name for c in d.channels if c.kind == "external" for p in c.producers if p.node == node}
    sinks = [op for op in g.of_kind("dest_sink_serde") if op.params[0] in external]
    if len(sinks) != 1:
        raise PreconditionFailed("NoOutput", "node needs exactly one external output")
    tag = g.predecessor(sinks[0].id)
    if tag is None or tag.kind != "map":
        raise PreconditionFailed("NoOutput", "external sink is not preceded by an address-tagging map")
    (feed,) = g.in_edges(tag.id)

    ed = GraphEditor(g)
    tee = ed.add("tee")
    ed.disconnect(feed)
    ed.connect(feed.src, tee, feed.src_port, None)
    addrs, cj, bsink = ed.add("source_stream", "server_addrs"), ed.add("cross_join"), ed.add("dest_sink_serde", "broadcast_out")
    bsrc, untag = ed.add("source_stream_serde", "broadcast_in"), ed.add("map", "untag")
    merge, gb, uniq = ed.add("merge"), ed.add("group_by", *params), ed.add("unique")
    ed.connect(tee, merge, "clients", None)
    ed.connect(tee, cj, "broadcast", 0)
    ed.connect(addrs, cj, None, 1)
    ed.connect(cj, bsink)
    ed.connect(bsrc, untag)
    ed.connect(untag, merge)
    ed.connect(merge, gb)
    ed.connect(gb, uniq)
    ed.connect(uniq, tag.id)
    ed.names += [("broadcast", cj), ("all_in", merge)]
    replica_graph = ed.build()

    env = dict(spec.env_dict(), server_addrs=members)
    copies = [NodeSpec(m, replica_graph, freeze_env(env)) for m in members]

    def expand(eps):
        out = []
        for p in eps:
            out += [Endpoint(m, p.name) for m in members] if p.node == node else [p]
        return tuple(out)

    channels = tuple(replace(c, producers=expand(c.producers), consumers=expand(c.consumers)) for c in d.channels)
    channels += (ChannelSpec(
        "broadcast",
        tuple(Endpoint(m, "broadcast_out") for m in members),
        tuple(Endpoint(m, "broadcast_in") for m in members),
        "network",
    ),)
    nodes = []
    for n in d.nodes:
        if n.name == node:
            nodes += copies
            continue
        env_n = n.env_dict()
        if node in (env_n.get("servers") or []):
            env_n["servers"] = members
            env_n["route_seed"] = route_seed
            n = replace(n, env=freeze_env(env_n))
        nodes.append(n)
    return replace(d, nodes=tuple(nodes), channels=channels)
