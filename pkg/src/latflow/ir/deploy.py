"""Multi-node deployments and their YAML file format.

A deployment file looks like::

    name: fig6
    nodes:
      client:
        graph: fig6_client.hfs        # or `program: |` with inline text
        env: {servers: [server], route_seed: 0}
      server:
        graph: fig6_server.hfs
    channels:
      reqs:
        producers: [client.reqs_out]
        consumers: [server.reqs_in]
        kind: network                 # local | network | external
        seed: 0
        params: {max_delay_ticks: 5, dup_prob: 1/4, max_dups: 2, batch_prob: 1/4}
      out: {producers: [server.out], kind: external}
    fds:
      - {relation: client_class, determinant: [client], dependent: [class]}
    schemas:
      client_class: [client, class]

Endpoints are ``node.name`` where ``name`` is the argument of a
``dest_sink_serde`` (producer) or ``source_stream_serde`` (consumer).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

import yaml

from ..netsim import LocalOrdered, NetworkAdversarial
from .dsl import parse_dsl, serialize_graph
from .graph import DataflowGraph, Diagnostic, IRError, graphs_isomorphic, validate_graph

CHANNEL_KINDS = ("local", "network", "external")

DEFAULT_NET_PARAMS = {"max_delay_ticks": 5, "dup_prob": Fraction(1, 4), "max_dups": 2, "batch_prob": Fraction(1, 4)}


@dataclass(frozen=True, order=True)
class Endpoint:
    node: str
    name: str

    @classmethod
    def parse(cls, text: str) -> "Endpoint":
        node, sep, name = text.partition(".")
        if not sep or not node or not name:
            raise IRError(f"endpoint {text!r} must look like node.name")
        return cls(node, name)

    def __str__(self) -> str:
        return f"{self.node}.{self.name}"


@dataclass(frozen=True)
class ChannelSpec:
    name: str
    producers: Tuple[Endpoint, ...]
    consumers: Tuple[Endpoint, ...] = ()
    kind: str = "network"
    seed: int = 0
    params: Tuple[Tuple[str, object], ...] = ()

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise IRError(f"channel {self.name}: unknown kind {self.kind!r}")
        if self.kind == "external" and self.consumers:
            raise IRError(f"external channel {self.name} cannot have consumers")
        if self.kind != "external" and not self.consumers:
            raise IRError(f"channel {self.name} has no consumers; declare it external")

    def param_dict(self) -> dict:
        return dict(self.params)

    def sim_kind(self, seed: Optional[int] = None, overrides: Optional[Mapping] = None):
        """netsim kind for this channel; ``seed`` and ``overrides`` replace the declared values."""
        if self.kind == "local":
            return LocalOrdered()
        params = {**DEFAULT_NET_PARAMS, **self.param_dict(), **(overrides or {})}
        return NetworkAdversarial(seed=self.seed if seed is None else seed, **params)


@dataclass(frozen=True)
class FunctionalDependency:
    relation: str
    determinant: Tuple[str, ...]
    dependent: Tuple[str, ...]


@dataclass(frozen=True)
class NodeSpec:
    name: str
    graph: DataflowGraph
    env: Tuple[Tuple[str, object], ...] = ()

    def env_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.env}


def freeze_env(env: Mapping) -> Tuple[Tuple[str, object], ...]:
    return tuple(sorted((k, tuple(v) if isinstance(v, list) else v) for k, v in env.items()))


@dataclass(frozen=True)
class Deployment:
    name: str
    nodes: Tuple[NodeSpec, ...]
    channels: Tuple[ChannelSpec, ...] = ()
    fds: Tuple[FunctionalDependency, ...] = ()
    schemas: Tuple[Tuple[str, Tuple[str, ...]], ...] = ()

    def node(self, name: str) -> NodeSpec:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    def node_names(self) -> List[str]:
        return [n.name for n in self.nodes]

    def channel(self, name: str) -> ChannelSpec:
        for c in self.channels:
            if c.name == name:
                return c
        raise KeyError(name)

    def schema(self, stream: str) -> Optional[Tuple[str, ...]]:
        return dict(self.schemas).get(stream)

    def with_node(self, spec: NodeSpec) -> "Deployment":
        return replace(self, nodes=tuple(spec if n.name == spec.name else n for n in self.nodes))

    def channel_for(self, endpoint: Endpoint, role: str) -> List[ChannelSpec]:
        attr = "producers" if role == "producer" else "consumers"
        return [c for c in self.channels if endpoint in getattr(c, attr)]


def single_node(name: str, graph: DataflowGraph, node: str = "server", **kw) -> Deployment:
    """Deployment of one node whose ``dest_sink_serde`` endpoints are all external."""
    channels = tuple(
        ChannelSpec(op.params[0], (Endpoint(node, op.params[0]),), kind="external")
        for op in graph.of_kind("dest_sink_serde")
    )
    return Deployment(name, (NodeSpec(node, graph),), channels, **kw)


def validate_deployment(d: Deployment, registry=None) -> List[Diagnostic]:
    diags: List[Diagnostic] = []
    names = d.node_names()
    if len(set(names)) != len(names):
        diags.append(Diagnostic("DuplicateNode", "node names are not unique"))
    endpoints = {}
    for n in d.nodes:
        for diag in validate_graph(n.graph, registry):
            diags.append(Diagnostic(diag.code, f"{n.name}: {diag.message}", (n.name,) + diag.where))
        for op in n.graph.of_kind("dest_sink_serde"):
            endpoints[Endpoint(n.name, op.params[0])] = "producer"
        for op in n.graph.of_kind("source_stream_serde"):
            endpoints[Endpoint(n.name, op.params[0])] = "consumer"
    for ep, role in sorted(endpoints.items()):
        if not d.channel_for(ep, role):
            diags.append(Diagnostic("UndeclaredChannel", f"{role} endpoint {ep} is not wired to a channel", (str(ep),)))
    for c in d.channels:
        for role, eps in (("producer", c.producers), ("consumer", c.consumers)):
            for ep in eps:
                if endpoints.get(ep) != role:
                    diags.append(Diagnostic("MissingEndpoint", f"channel {c.name}: {role} {ep} does not exist", (c.name,)))
    schemas = dict(d.schemas)
    for fd in d.fds:
        attrs = schemas.get(fd.relation)
        if attrs is None:
            diags.append(Diagnostic("BadFD", f"FD on unknown relation {fd.relation}", (fd.relation,)))
        elif not set(fd.determinant + fd.dependent) <= set(attrs):
            diags.append(Diagnostic("BadFD", f"FD attributes not in {fd.relation}{tuple(attrs)}", (fd.relation,)))
    return diags


def deployments_isomorphic(a: Deployment, b: Deployment, ignore_params: bool = False) -> bool:
    if sorted(a.node_names()) != sorted(b.node_names()):
        return False
    for n in a.nodes:
        m = b.node(n.name)
        if n.env != m.env or not graphs_isomorphic(n.graph, m.graph, ignore_params):
            return False

    def chan_key(c: ChannelSpec):
        return (c.name, tuple(sorted(c.producers)), tuple(sorted(c.consumers)), c.kind, c.params)

    return (
        sorted(map(chan_key, a.channels)) == sorted(map(chan_key, b.channels))
        and set(a.fds) == set(b.fds)
    )


# -- YAML -------------------------------------------------------------------

def _param_value(v):
    if isinstance(v, str) and "/" in v:
        return Fraction(v)
    return v


def _param_text(v):
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    return v


def deployment_from_dict(doc: Mapping, base_dir: Optional[Path] = None) -> Deployment:
    nodes = []
    for name, spec in (doc.get("nodes") or {}).items():
        spec = spec or {}
        if "program" in spec:
            text = spec["program"]
        elif "graph" in spec:
            text = Path(base_dir or ".", spec["graph"]).read_text()
        else:
            raise IRError(f"node {name} needs `graph` or `program`")
        nodes.append(NodeSpec(name, parse_dsl(text), freeze_env(spec.get("env") or {})))
    channels = []
    for name, spec in (doc.get("channels") or {}).items():
        params = tuple(sorted((k, _param_value(v)) for k, v in (spec.get("params") or {}).items()))
        channels.append(ChannelSpec(
            name,
            tuple(Endpoint.parse(p) for p in spec.get("producers") or []),
            tuple(Endpoint.parse(p) for p in spec.get("consumers") or []),
            spec.get("kind", "network"),
            int(spec.get("seed", 0)),
            params,
        ))
    fds = tuple(
        FunctionalDependency(f["relation"], tuple(f["determinant"]), tuple(f["dependent"]))
        for f in doc.get("fds") or []
    )
    schemas = tuple(sorted((k, tuple(v)) for k, v in (doc.get("schemas") or {}).items()))
    return Deployment(doc.get("name", "deployment"), tuple(nodes), tuple(channels), fds, schemas)


def load_deployment(path) -> Deployment:
    path = Path(path)
    return deployment_from_dict(yaml.safe_load(path.read_text()) or {}, path.parent)


def deployment_to_dict(d: Deployment) -> dict:
    doc: dict = {"name": d.name, "nodes": {}, "channels": {}}
    for n in d.nodes:
        entry: dict = {"program": serialize_graph(n.graph)}
        if n.env:
            entry["env"] = n.env_dict()
        doc["nodes"][n.name] = entry
    for c in d.channels:
        entry = {"producers": [str(p) for p in c.producers]}
        if c.consumers:
            entry["consumers"] = [str(p) for p in c.consumers]
        entry["kind"] = c.kind
        if c.kind == "network":
            entry["seed"] = c.seed
        if c.params:
            entry["params"] = {k: _param_text(v) for k, v in c.params}
        doc["channels"][c.name] = entry
    if d.fds:
        doc["fds"] = [
            {"relation": f.relation, "determinant": list(f.determinant), "dependent": list(f.dependent)}
            for f in d.fds
        ]
    if d.schemas:
        doc["schemas"] = {k: list(v) for k, v in d.schemas}
    return doc


class _Dumper(yaml.SafeDumper):
    pass


def _str_presenter(dumper, data):
    style = "|" if "\n" in data else None
    return dumper.represent_scalar("tag:yaml.org,2002:str", data, style=style)


_Dumper.add_representer(str, _str_presenter)


def dump_deployment(d: Deployment) -> str:
    return yaml.dump(deployment_to_dict(d), Dumper=_Dumper, sort_keys=False, width=200)
