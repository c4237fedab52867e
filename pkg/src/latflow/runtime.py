"""Deterministic tick-based executor for deployments.

Every tick, in-flight channel messages that are due are handed to their
``source_stream_serde`` endpoints, then each node (in declaration order) runs
its operators once in topological order.  Edges inside a node are FIFO and
exactly-once.  A run ends at quiescence: sources exhausted, channels drained,
and an idle round.  Fold-flavoured ``group_by`` operators only emit at that
point ("end of time"), one at a time, after which the run continues until the
next quiescence.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

from . import lattice as L
from .codec import decode_bytes, encode, encode_bytes
from .ir.deploy import Deployment, Endpoint
from .ir.graph import OperatorNode
from .netsim import LocalOrdered, SimChannel, derive_seed
from .registry import FunctionRegistry, default_registry
from .scenario import Scenario

DEFAULT_TICK_LIMIT = 1_000_000


class DataflowRuntimeError(Exception):
    pass


class TickLimitExceeded(DataflowRuntimeError):
    pass


class RuntimeTypeError(DataflowRuntimeError):
    pass


class UnknownStream(DataflowRuntimeError):
    pass


class OperatorMergeError(DataflowRuntimeError):
    def __init__(self, op_id: str, cause: L.LatticeError):
        super().__init__(f"{op_id}: {cause}")
        self.op_id = op_id
        self.cause = cause


@dataclass
class OperatorState:
    cursor: int = 0  # sources: records emitted so far
    tables: Tuple[dict, dict] = field(default_factory=lambda: ({}, {}))  # join history per side
    pairs: Tuple[list, list] = field(default_factory=lambda: ([], []))  # cross_join history
    groups: dict = field(default_factory=dict)  # group_by
    flushed: bool = False
    flush_requested: bool = False
    watermarks: dict = field(default_factory=dict)  # odiff
    buffers: dict = field(default_factory=dict)  # append
    seen: set = field(default_factory=set)  # unique


@dataclass
class StepContext:
    registry: FunctionRegistry
    env: dict = field(default_factory=dict)
    streams: Mapping[str, Any] = field(default_factory=dict)
    tee_ports: Dict[str, Tuple] = field(default_factory=dict)  # tee id -> output port names
    flavors: Dict[str, str] = field(default_factory=dict)  # group_by id -> lattice | fold


def _pair(op: OperatorNode, rec) -> Tuple[Any, Any]:
    if not (isinstance(rec, tuple) and len(rec) == 2):
        raise RuntimeTypeError(f"{op.id} {op.kind}: expected a (key, value) pair, got {encode_safe(rec)}")
    return rec


def encode_safe(value) -> str:
    try:
        return encode(value)
    except TypeError:
        return repr(value)


def _lift(fn, rec):
    if isinstance(rec, L.BoundedPrefix):
        return L.BoundedPrefix(tuple(fn(x) for x in rec.prefix), rec.declared_len)
    if isinstance(rec, L.SealedSetIndexed):
        return L.SealedSetIndexed(tuple((p, fn(v)) for p, v in rec.entries), rec.seal)
    if isinstance(rec, tuple) and len(rec) == 2 and isinstance(rec[1], (L.BoundedPrefix, L.SealedSetIndexed)):
        return (rec[0], _lift(fn, rec[1]))
    return fn(rec)


def _keyed(rec):
    """Split a record into (key, lattice point); bare points use key None."""
    if isinstance(rec, (L.BoundedPrefix, L.SealedSetIndexed)):
        return None, rec, False
    if isinstance(rec, tuple) and len(rec) == 2:
        return rec[0], rec[1], True
    raise RuntimeTypeError(f"expected a lattice point or (key, point), got {encode_safe(rec)}")


def group_flavor(op: OperatorNode, registry: FunctionRegistry) -> str:
    """``lattice`` or ``fold``."""
    init, merge = op.params
    role = registry.get(merge).role
    if role == "merge":
        bottom = registry.call(init)
        if not L.is_lattice_point(bottom) or bottom != L.bottom_of(bottom):
            raise RuntimeTypeError(f"{op.id}: {init} does not produce a lattice bottom")
        return "lattice"
    if role == "fold":
        return "fold"
    raise RuntimeTypeError(f"{op.id}: {merge} is neither a merge nor a fold function")


def step_operator(op: OperatorNode, state: OperatorState, inputs: List[Tuple[Any, Any]], ctx: StepContext):
    """Pure form of one operator firing: returns (new_state, [(out_port, record), ...]).

    ``inputs`` is a batch of (in_port, record).  Sources ignore it and emit
    their next record(s); a ``group_by`` fold emits only when
    ``state.flush_requested`` is set.
    """
    state = copy.deepcopy(state)
    return state, _step(op, state, inputs, ctx)


def _step(op: OperatorNode, st: OperatorState, inputs, ctx: StepContext) -> List[Tuple[Any, Any]]:
    kind = op.kind
    out: List[Tuple[Any, Any]] = []
    reg = ctx.registry

    if kind in ("source_iter", "source_stream"):
        name = op.params[0]
        data = ctx.env.get(name, ctx.streams.get(name))
        if data is None:
            raise UnknownStream(f"{op.id}: no stream or collection named {name!r}")
        if kind == "source_iter":
            if st.cursor == 0:
                out = [(None, r) for r in data]
                st.cursor = max(1, len(data))
        elif st.cursor < len(data):
            out = [(None, data[st.cursor])]
            st.cursor += 1
        return out

    if kind == "source_stream_serde":
        return [(None, r) for _, r in inputs]

    if kind == "map":
        fname = op.params[0]
        spec = reg.get(fname)
        try:
            if spec.pointwise:
                return [(None, _lift(lambda x: reg.call(fname, x, env=ctx.env), r)) for _, r in inputs]
            return [(None, reg.call(fname, r, env=ctx.env)) for _, r in inputs]
        except (TypeError, ValueError, IndexError) as err:
            raise RuntimeTypeError(f"{op.id} map({fname}): {err}") from err

    if kind == "join":
        for port, rec in inputs:
            k, v = _pair(op, rec)
            mine, other = st.tables[port], st.tables[1 - port]
            mine.setdefault(k, []).append(v)
            for w in other.get(k, ()):
                out.append((None, (k, (v, w) if port == 0 else (w, v))))
        return out

    if kind == "cross_join":
        for port, rec in inputs:
            st.pairs[port].append(rec)
            for w in st.pairs[1 - port]:
                out.append((None, (rec, w) if port == 0 else (w, rec)))
        return out

    if kind == "group_by":
        init, merge = op.params
        flavor = ctx.flavors.get(op.id) or ctx.flavors.setdefault(op.id, group_flavor(op, reg))
        for _, rec in inputs:
            k, v = _pair(op, rec)
            if flavor == "lattice":
                old = st.groups.get(k)
                if old is None:
                    old = reg.call(init)
                try:
                    new = reg.call(merge, old, v)
                except L.LatticeError as err:
                    raise OperatorMergeError(op.id, err) from err
                if new != old:
                    st.groups[k] = new
                    out.append((None, (k, new)))
            else:
                acc = st.groups[k] if k in st.groups else reg.call(init)
                st.groups[k] = reg.call(merge, acc, v)
        if flavor == "fold" and st.flush_requested and not st.flushed:
            st.flushed = True
            out.extend((None, (k, acc)) for k, acc in st.groups.items())
        return out

    if kind == "tee":
        ports = ctx.tee_ports.get(op.id, ())
        return [(p, r) for _, r in inputs for p in ports]

    if kind == "merge":
        return [(None, r) for _, r in inputs]

    if kind == "unique":
        for _, rec in inputs:
            if rec not in st.seen:
                st.seen.add(rec)
                out.append((None, rec))
        return out

    if kind == "odiff":
        for _, rec in inputs:
            k, point, keyed = _keyed(rec)
            if not isinstance(point, L.BoundedPrefix):
                raise RuntimeTypeError(f"{op.id} odiff expects bounded prefixes, got {encode_safe(point)}")
            mark = st.watermarks.get(k, 0)
            # one indexed singleton per new item, each carrying the known length as its seal
            for i in range(mark, len(point.prefix)):
                delta = L.SealedSetIndexed(((i, point.prefix[i]),), point.declared_len)
                out.append((None, (k, delta) if keyed else delta))
            st.watermarks[k] = max(mark, len(point.prefix))
        return out

    if kind == "append":
        fixed_len = op.params[0] if op.params else None
        latest: dict = {}
        for _, rec in inputs:
            k, delta, keyed = _keyed(rec)
            if not isinstance(delta, L.SealedSetIndexed):
                raise RuntimeTypeError(f"{op.id} append expects indexed items, got {encode_safe(delta)}")
            if not delta.entries:
                continue
            buf = st.buffers.setdefault(k, [])
            # positions are not consulted: the incoming edge is trusted to be ordered and exactly-once
            buf.extend(v for _, v in delta.entries)
            n = fixed_len if fixed_len is not None else delta.seal
            if n is not None and len(buf) > n:
                raise RuntimeTypeError(f"{op.id} append overflow: {len(buf)} items for length {n}")
            latest[k] = (L.BoundedPrefix(tuple(buf), n), keyed)
        # one reassembled prefix per key per firing, so a multi-item delta yields one output
        return [(None, (k, point) if keyed else point) for k, (point, keyed) in latest.items()]

    if kind == "dest_sink_serde":
        return [(None, r) for _, r in inputs]

    raise RuntimeTypeError(f"no semantics for operator kind {kind!r}")


# -- the executor -----------------------------------------------------------

@dataclass
class RunResult:
    outputs: Dict[str, list]
    trace: List[str]
    ticks: int
    states: Dict[Tuple[str, str], Any]
    schedules: Dict[str, list]

    def __iter__(self):
        yield self.outputs
        yield self.trace

    def trace_text(self) -> str:
        return "".join(line + "\n" for line in self.trace)


class _Node:
    def __init__(self, spec, ctx: StepContext):
        self.name = spec.name
        self.graph = spec.graph
        self.order = [spec.graph.node(i) for i in spec.graph.topo_order()]
        self.state = {op.id: OperatorState() for op in self.order}
        self.queues: Dict[str, list] = {op.id: [] for op in self.order}
        self.ctx = ctx
        self.out_edges = {op.id: spec.graph.out_edges(op.id) for op in self.order}
        ctx.tee_ports = {op.id: tuple(dict.fromkeys(e.src_port for e in self.out_edges[op.id]))
                         for op in self.order if op.kind == "tee"}
        for op in self.order:
            if op.kind == "group_by":
                ctx.flavors[op.id] = group_flavor(op, ctx.registry)  # resolve functions up front


class Runtime:
    def __init__(
        self,
        d: Deployment,
        scenario: Union[Scenario, Mapping[str, Any], None] = None,
        seeds: Union[int, Mapping[str, int], None] = None,
        *,
        registry: Optional[FunctionRegistry] = None,
        overrides: Optional[Mapping[str, Any]] = None,
        local_baseline: bool = False,
        route_seed: Optional[int] = None,
        tick_limit: int = DEFAULT_TICK_LIMIT,
        trace: bool = True,
    ):
        self.d = d
        self.registry = registry or default_registry()
        if scenario is None:
            streams = {}
        elif isinstance(scenario, Scenario):
            streams = scenario.streams()
        else:
            streams = dict(scenario)
        self.tick = 0
        self.tick_limit = tick_limit
        self.tracing = trace
        self.trace: List[str] = []

        self.nodes: List[_Node] = []
        for spec in d.nodes:
            env = spec.env_dict()
            if route_seed is not None and "route_seed" in env:
                env["route_seed"] = route_seed
            self.nodes.append(_Node(spec, StepContext(self.registry, env, streams)))

        self.channels: Dict[str, SimChannel] = {}
        self.external: Dict[Endpoint, str] = {}
        self.sink_channel: Dict[Endpoint, str] = {}
        self.outputs: Dict[str, list] = {}
        for c in d.channels:
            for p in c.producers:
                self.sink_channel[p] = c.name
            if c.kind == "external":
                for p in c.producers:
                    self.external[p] = c.name
                    self.outputs[f"{c.name}@{p.node}"] = []
                continue
            if local_baseline:
                kind = LocalOrdered()
            elif isinstance(seeds, int):
                kind = c.sim_kind(derive_seed(seeds, c.name), overrides)
            elif isinstance(seeds, Mapping) and c.name in seeds:
                kind = c.sim_kind(seeds[c.name], overrides)
            else:
                kind = c.sim_kind(None, overrides)
            self.channels[c.name] = SimChannel(c.name, kind)
        self.consumers = {c.name: c.consumers for c in d.channels}
        self.inbox: Dict[Endpoint, list] = {}

    # -- tracing ------------------------------------------------------------

    def _log(self, node: str, op: str, ev: str, payload) -> None:
        if self.tracing:
            self.trace.append(f"tick={self.tick} node={node} op={op} ev={ev} payload={encode_safe(payload)}")

    # -- one tick -----------------------------------------------------------

    def step(self) -> bool:
        """Run one tick; True if any operator emitted."""
        for name, ch in self.channels.items():
            for dest, data, sender in ch.deliverable(self.tick):
                self.inbox.setdefault(dest, []).append((decode_bytes(data), sender))
        active = False
        for node in self.nodes:
            active |= self._run_node(node)
        return active

    def _run_node(self, node: _Node) -> bool:
        active = False
        for op in node.order:
            inputs = node.queues[op.id]
            node.queues[op.id] = []
            if op.kind == "source_stream_serde":
                ep = Endpoint(node.name, op.params[0])
                got = self.inbox.pop(ep, [])
                for rec in got:
                    self._log(node.name, op.id, "recv", rec)
                inputs = [(None, r) for r in got]
            st = node.state[op.id]
            if not inputs and op.kind not in ("source_iter", "source_stream") and not (
                op.kind == "group_by" and st.flush_requested and not st.flushed
            ):
                continue
            produced = _step(op, st, inputs, node.ctx)
            if op.kind == "dest_sink_serde":
                for _, rec in produced:
                    self._sink(node, op, rec)
                continue
            if op.kind == "group_by" and self.tracing:
                for _, rec in produced:
                    self._log(node.name, op.id, "state", rec)
            for port, rec in produced:
                active = True
                self._log(node.name, op.id, "emit", rec)
                for e in node.out_edges[op.id]:
                    if e.src_port == port:
                        node.queues[e.dst].append((e.dst_port, rec))
        return active

    def _sink(self, node: _Node, op: OperatorNode, rec) -> None:
        payload, addr = _pair(op, rec)
        ep = Endpoint(node.name, op.params[0])
        data = encode_bytes(payload)
        if ep in self.external:
            self._log(node.name, op.id, "send", payload)
            self.outputs[f"{self.external[ep]}@{node.name}"].append(decode_bytes(data))
            return
        if ep not in self.sink_channel:
            raise RuntimeTypeError(f"{node.name}.{op.params[0]} is not wired to any channel")
        ch_name = self.sink_channel[ep]
        dests = [c for c in self.consumers[ch_name] if c.node == addr]
        if not dests:
            raise RuntimeTypeError(f"{op.id}: address {addr!r} is not a consumer of channel {ch_name}")
        self._log(node.name, op.id, "send", (payload, addr))
        for dest in dests:
            self.channels[ch_name].enqueue((dest, data, node.name), self.tick)

    # -- quiescence ---------------------------------------------------------

    def sources_exhausted(self) -> bool:
        for node in self.nodes:
            for op in node.order:
                st = node.state[op.id]
                if op.kind == "source_iter" and st.cursor == 0:
                    return False
                if op.kind == "source_stream":
                    name = op.params[0]
                    data = node.ctx.env.get(name, node.ctx.streams.get(name, ()))
                    if st.cursor < len(data):
                        return False
        return True

    def idle(self) -> bool:
        return (
            self.sources_exhausted()
            and all(ch.pending() == 0 for ch in self.channels.values())
            and not any(self.inbox.values())
            and not any(q for node in self.nodes for q in node.queues.values())
        )

    def pending_folds(self) -> List[Tuple[_Node, OperatorNode]]:
        return [
            (node, op)
            for node in self.nodes
            for op in node.order
            if op.kind == "group_by" and node.ctx.flavors[op.id] == "fold" and not node.state[op.id].flushed
        ]

    def quiescent(self) -> bool:
        return self.idle() and not self.pending_folds()

    def run(self) -> RunResult:
        while True:
            if self.tick > self.tick_limit:
                raise TickLimitExceeded(f"no quiescence within {self.tick_limit} ticks")
            active = self.step()
            if not active and self.idle():
                folds = self.pending_folds()
                if not folds:
                    break
                node, op = folds[0]
                node.state[op.id].flush_requested = True
            self.tick += 1
        return RunResult(self.outputs, self.trace, self.tick, self.states(), self.schedules())

    def states(self) -> Dict[Tuple[str, str], Any]:
        out = {}
        for node in self.nodes:
            for op in node.order:
                if op.kind == "group_by":
                    groups = dict(node.state[op.id].groups)
                    if node.ctx.flavors[op.id] == "lattice":
                        groups = L.KeyedLattice(groups)
                    out[(node.name, op.id)] = groups
        return out

    def schedules(self) -> Dict[str, list]:
        return {name: list(ch.schedules) for name, ch in self.channels.items()}


def detect_quiescence(runtime: Runtime) -> bool:
    return runtime.quiescent()


def run_deployment(
    d: Deployment,
    scenario=None,
    seeds=None,
    tick_limit: int = DEFAULT_TICK_LIMIT,
    **kwargs,
) -> RunResult:
    """Run ``d`` to quiescence.  Deterministic in (d, scenario, seeds, kwargs)."""
    return Runtime(d, scenario, seeds, tick_limit=tick_limit, **kwargs).run()
