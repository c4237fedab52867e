"""Named functions referenced from dataflow programs.

Programs never carry code; ``map(fmt_kv)`` or ``group_by(bp_bot, bp_merge)``
name entries of a :class:`FunctionRegistry`.  Each entry declares the
algebraic facts the monotonicity analysis and the rewrite rules rely on.
Those declarations are trusted, not checked.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

from . import lattice as L
from .codec import encode
from .netsim import derive_seed


class UnknownFunction(KeyError):
    pass


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    fn: Callable
    role: str  # "map" | "init" | "merge" | "fold"
    pure: Optional[bool] = None  # None: properties undeclared
    pointwise: bool = False  # map defined item-by-item, lifted over lattice points
    order_sensitive: bool = False  # fold whose result depends on arrival order
    lattice: Optional[str] = None  # "bp" | "ssiv" for init/merge functions
    uses_env: bool = False
    meta: Dict[str, Any] = field(default_factory=dict)


class FunctionRegistry:
    def __init__(self, specs=()):
        self._specs: Dict[str, FunctionSpec] = {}
        self.calls: Counter = Counter()
        for spec in specs:
            self.register(spec)

    def register(self, spec: FunctionSpec) -> None:
        self._specs[spec.name] = spec

    def get(self, name: str) -> FunctionSpec:
        try:
            return self._specs[name]
        except KeyError:
            raise UnknownFunction(name) from None

    def __contains__(self, name: str) -> bool:
        return name in self._specs

    def names(self):
        return sorted(self._specs)

    def call(self, name: str, *args, env=None):
        spec = self.get(name)
        self.calls[name] += 1
        if spec.uses_env:
            return spec.fn(*args, env=env or {})
        return spec.fn(*args)


# -- built-ins --------------------------------------------------------------

def _fmt_kv(rec):
    client, (li, cls) = rec
    return ((client, cls), li)


def _vec_push(acc, item):
    return acc + (item,)


def _ssiv_merge(a, b):
    # BP inputs are read through the isomorphism so ssiv state can absorb append's output
    if isinstance(a, L.BoundedPrefix):
        a = L.bp_to_ssiv(a)
    if isinstance(b, L.BoundedPrefix):
        b = L.bp_to_ssiv(b)
    return L.ssiv_merge(a, b)


def route(key, env) -> str:
    """Static seeded assignment of a routing key to one of ``env['servers']``."""
    servers = env.get("servers") or []
    if not servers:
        raise ValueError("no servers configured for routing")
    if len(servers) == 1:
        return servers[0]
    return servers[derive_seed(int(env.get("route_seed", 0)), encode(key)) % len(servers)]


def _tag_server(pair, env):
    return (pair, route(pair[0], env))


def _upper_item(item):
    if isinstance(item, str):
        return item.upper()
    if isinstance(item, tuple):
        return tuple(_upper_item(x) for x in item)
    return item


def default_registry() -> FunctionRegistry:
    """A fresh registry with the shopping-cart built-ins (and fresh call counters)."""
    return FunctionRegistry([
        FunctionSpec("fmt_kv", _fmt_kv, "map", pure=True,
                     meta={"key_parts": ("key", "right"), "value_part": "left"}),
        FunctionSpec("tag_out_addr", lambda m: (m, "out_addr"), "map", pure=True),
        FunctionSpec("tag_server", _tag_server, "map", pure=True, uses_env=True),
        FunctionSpec("untag", lambda pair: pair[0], "map", pure=True),
        FunctionSpec("uppercase", _upper_item, "map", pure=True, pointwise=True),
        FunctionSpec("identity", lambda x: x, "map", pure=True, pointwise=True),
        FunctionSpec("vec_bot", lambda: (), "init", pure=True),
        FunctionSpec("vec_push", _vec_push, "fold", pure=True, order_sensitive=True,
                     meta={"seq_append": True}),
        FunctionSpec("bp_bot", L.bp_bottom, "init", pure=True, lattice="bp"),
        FunctionSpec("bp_merge", L.bp_merge, "merge", pure=True, lattice="bp"),
        FunctionSpec("ssiv_bot", L.ssiv_bottom, "init", pure=True, lattice="ssiv"),
        FunctionSpec("ssiv_merge", _ssiv_merge, "merge", pure=True, lattice="ssiv",
                     meta={"reassembles": True}),
    ])


LATTICE_PAIRS = {"bp": ("bp_bot", "bp_merge"), "ssiv": ("ssiv_bot", "ssiv_merge")}


def is_lattice_merge(name: str, registry: Optional[FunctionRegistry] = None) -> bool:
    registry = registry or default_registry()
    return name in registry and registry.get(name).role == "merge"
