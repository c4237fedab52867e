"""Equivalence checking across program variants and channel schedules.

Every run is reduced to its sealed view: for each (client, class), the
completed cart as an ordered item tuple.  Bounded prefixes contribute only
their top points, SSIV tops are read in position order, and fold outputs
are taken as emitted at quiescence.  Two runs agree when their sealed views
are equal.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from . import lattice as L
from .codec import encode
from .figures import load_variant
from .ir.deploy import Deployment
from .registry import FunctionRegistry, is_lattice_merge
from .runtime import RunResult, Runtime
from .scenario import Scenario, sequential_fold_oracle

CONFLICT = "CONFLICT"


def sealed_value(point) -> Optional[Tuple]:
    """The completed cart carried by ``point``, or None if it is not yet complete."""
    if isinstance(point, L.BoundedPrefix):
        return tuple(point.prefix) if L.bp_is_top(point) else None
    if isinstance(point, L.SealedSetIndexed):
        return tuple(point.values()) if L.ssiv_is_top(point) else None
    if isinstance(point, tuple):
        return point
    return None


def sealed_view(result: RunResult) -> Dict[Tuple, object]:
    """(client, class) -> completed cart; keys whose sealed values disagree map to CONFLICT."""
    view: Dict[Tuple, object] = {}
    for _, records in sorted(result.outputs.items()):
        for key, point in records:
            value = sealed_value(point)
            if value is None:
                continue
            if key in view and view[key] != value:
                view[key] = CONFLICT
            else:
                view.setdefault(key, value)
    return view


def output_multiset(result: RunResult) -> Tuple[Tuple[str, int], ...]:
    """Every record that reached an external sink, as a sorted multiset of encodings."""
    counts = Counter(encode(r) for records in result.outputs.values() for r in records)
    return tuple(sorted(counts.items()))


def render_view(view: Dict[Tuple, object]) -> List[str]:
    lines = []
    for (client, cls), cart in sorted(view.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
        text = CONFLICT if cart == CONFLICT else "[" + ", ".join(encode(i) for i in cart) + "]"
        lines.append(f"client={client} class={cls} cart={text}")
    return lines


def converged_states(result: RunResult, d: Deployment, registry: Optional[FunctionRegistry] = None) -> Dict[str, object]:
    """Per node, the keyed state of its last lattice group_by (the converged cart table on replicas)."""
    out = {}
    for n in d.nodes:
        last = None
        for op_id in n.graph.topo_order():
            op = n.graph.node(op_id)
            if op.kind == "group_by" and is_lattice_merge(op.params[1], registry):
                last = op_id
        if last is not None:
            out[n.name] = result.states[(n.name, last)]
    return out


def replicas_converged(states: Dict[str, object]) -> bool:
    values = list(states.values())
    return all(v == values[0] for v in values[1:])


@dataclass(frozen=True)
class Witness:
    variant: str
    seed: Optional[int]  # None: the local (in-order) baseline
    expected: Tuple[str, ...]
    got: Tuple[str, ...]


@dataclass
class VerificationResult:
    variants: Tuple[str, ...]
    seeds: Tuple[int, ...]
    outcome: str = "Equivalent"
    witness: Optional[Witness] = None
    runs: int = 0
    reference: Tuple[str, ...] = field(default=())

    @property
    def equivalent(self) -> bool:
        return self.outcome == "Equivalent"

    def report(self) -> List[str]:
        lines = [
            f"variants: {', '.join(self.variants)}",
            f"seeds: {len(self.seeds)} + local baseline",
            f"runs: {self.runs}",
            f"outcome: {self.outcome}",
        ]
        if self.witness is not None:
            w = self.witness
            where = "local baseline" if w.seed is None else f"seed {w.seed}"
            lines.append(f"witness: variant {w.variant} at {where}")
            lines += ["  expected: " + x for x in w.expected] + ["  got:      " + x for x in w.got]
        return lines


def run_variant(
    d: Deployment,
    scenario: Scenario,
    seed: Optional[int],
    overrides=None,
    trace: bool = False,
) -> RunResult:
    """``seed`` None runs every channel in order; otherwise it seeds the channels and the replica routing."""
    if seed is None:
        return Runtime(d, scenario, local_baseline=True, trace=trace).run()
    return Runtime(d, scenario, seed, route_seed=seed, overrides=overrides, trace=trace).run()


def cmd_verify(
    variants: Sequence[str],
    scenario: Scenario,
    n_seeds: int,
    *,
    seed_base: int = 0,
    replicas: Optional[int] = None,
    against_oracle: bool = False,
    overrides=None,
    deployments: Optional[Dict[str, Deployment]] = None,
) -> VerificationResult:
    """Run each variant on the local baseline and ``n_seeds`` adversarial seeds; stop at the first disagreement.

    The reference is the first variant's baseline run, or the sequential fold
    of each session when ``against_oracle`` is set.
    """
    if not variants or n_seeds < 1:
        raise ValueError("need at least one variant and one seed")
    seeds = tuple(range(seed_base, seed_base + n_seeds))
    result = VerificationResult(tuple(variants), seeds)
    ref = sequential_fold_oracle(scenario) if against_oracle else None
    for name in variants:
        d = (deployments or {}).get(name) or load_variant(name, replicas)
        for seed in (None,) + seeds:
            view = sealed_view(run_variant(d, scenario, seed, overrides))
            result.runs += 1
            if ref is None:
                ref = view
            if view != ref:
                result.outcome = "Diverged"
                result.witness = Witness(name, seed, tuple(render_view(ref)), tuple(render_view(view)))
                result.reference = tuple(render_view(ref))
                return result
    result.reference = tuple(render_view(ref))
    return result


def distinct_outputs(d: Deployment, scenario: Scenario, seeds: Iterable[int], overrides=None) -> int:
    """How many different external output multisets ``d`` produces over ``seeds``."""
    return len({output_multiset(run_variant(d, scenario, s, overrides)) for s in seeds})
