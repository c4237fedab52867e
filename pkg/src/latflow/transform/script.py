"""Transform scripts: one ``rule arg=value ...`` invocation per line.

Graph rules (``upgrade_to_bp`` and friends) run on every node where they
match unless ``node=`` names one.  Deployment rules take their arguments
from the line; ``push_groupby_through_join`` reads the FD and schemas from
the deployment's annotations.
"""

from __future__ import annotations

import shlex
from collections import Counter
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional, Tuple

from ..ir.deploy import Deployment
from ..registry import FunctionRegistry, default_registry
from . import rules as R


@dataclass(frozen=True)
class RewriteRule:
    name: str
    precondition: str
    level: str  # "graph" | "deployment"
    apply: Callable


def _fd_rule(g, d: Deployment, registry, fd: Optional[str] = None):
    fds = [f for f in d.fds if fd is None or f.relation == fd]
    if not fds:
        return R.push_groupby_through_join(g, None, dict(d.schemas), registry)
    last: Optional[R.PreconditionFailed] = None
    for f in fds:
        try:
            return R.push_groupby_through_join(g, f, dict(d.schemas), registry)
        except R.PreconditionFailed as err:
            last = err
    raise last


RULES: Dict[str, RewriteRule] = {r.name: r for r in (
    RewriteRule("upgrade_to_bp", "a sequence-append fold over a raw stream source", "graph",
                lambda g, d, reg: R.upgrade_to_bp(g, reg)),
    RewriteRule("upgrade_to_ssiv", "a bounded-prefix group_by over a _bp stream source", "graph",
                lambda g, d, reg: R.upgrade_to_ssiv(g, reg)),
    RewriteRule("insert_odiff_append", "a local edge carrying bounded prefixes", "deployment",
                lambda d, reg, edge, node=None: R.insert_odiff_append_in(d, edge, node, reg)),
    RewriteRule("push_through_odiff", "an item-wise map right after an append fed by odiff", "graph",
                lambda g, d, reg: R.push_through_odiff(g, reg)),
    RewriteRule("fuse_append", "an append feeding a reassembling lattice group_by", "graph",
                lambda g, d, reg: R.fuse_append(g, reg)),
    RewriteRule("push_groupby_through_join", "join -> map -> group_by keyed by an FD-determined key", "graph",
                _fd_rule),
    RewriteRule("elide_subaggregation", "two same-lattice group_bys linked by morphisms only", "graph",
                lambda g, d, reg: R.elide_subaggregation(g, reg)),
    RewriteRule("cut_flow", "a Safe edge next to the node's group_by", "deployment",
                lambda d, reg, placement="Upstream", node=None, edge=None, channel=None, upstream_node="client":
                R.cut_flow(d, placement, node=node, edge=R.edge_arg(edge) if edge else None,
                           channel=channel, upstream_node=upstream_node, registry=reg)),
    RewriteRule("replicate_with_broadcast", "a node whose state is all lattice group_by state", "deployment",
                lambda d, reg, node="server", replicas="2", membership=None, route_seed="0":
                R.replicate_with_broadcast(d, node, int(replicas),
                                           membership.split(",") if membership else None,
                                           int(route_seed), reg)),
)}


def apply_rule(d: Deployment, name: str, args: Dict[str, str], registry: Optional[FunctionRegistry] = None) -> Deployment:
    registry = registry or default_registry()
    if name not in RULES:
        raise R.PreconditionFailed("UnknownRule", name)
    rule = RULES[name]
    try:
        if rule.level == "deployment":
            return rule.apply(d, registry, **args)
        node = args.pop("node", None)
        targets = [d.node(node)] if node else list(d.nodes)
        out, first_err, hits = d, None, 0
        for spec in targets:
            try:
                g = rule.apply(spec.graph, d, registry, **args)
            except R.PreconditionFailed as err:
                first_err = first_err or err
                continue
            out = out.with_node(replace(spec, graph=g))
            hits += 1
        if not hits:
            raise first_err or R.PreconditionFailed("NoMatch", name)
        return out
    except TypeError as err:
        raise R.PreconditionFailed("BadArgument", str(err)) from None
    except KeyError as err:
        raise R.PreconditionFailed("NoSuchNode", str(err)) from None


@dataclass(frozen=True)
class ScriptStep:
    line: int
    rule: str
    ok: bool
    message: str = ""


class ScriptFailed(R.TransformError):
    def __init__(self, step: ScriptStep, log: List[ScriptStep], partial: Deployment):
        super().__init__(f"line {step.line}: {step.rule} failed: {step.message}")
        self.step = step
        self.log = log
        self.partial = partial


def parse_script(text: str) -> List[Tuple[int, str, Dict[str, str]]]:
    steps = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = shlex.split(line)
        args = {}
        for w in words[1:]:
            key, sep, value = w.partition("=")
            if not sep:
                # a bare word after cut_flow is its placement
                key, value = "placement", w
            args[key] = value
        steps.append((lineno, words[0], args))
    return steps


def run_script(d: Deployment, text: str, registry: Optional[FunctionRegistry] = None) -> Tuple[Deployment, List[ScriptStep]]:
    """Apply each line in order; stop at the first failure with :class:`ScriptFailed`."""
    log: List[ScriptStep] = []
    for lineno, name, args in parse_script(text):
        try:
            d = apply_rule(d, name, dict(args), registry)
        except R.TransformError as err:
            step = ScriptStep(lineno, name, False, str(err))
            log.append(step)
            raise ScriptFailed(step, log, d) from err
        log.append(ScriptStep(lineno, name, True))
    return d, log


def diff_summary(before: Deployment, after: Deployment) -> List[str]:
    """Per node, the operators added and removed (by rendering)."""
    lines = []
    old = {n.name: n for n in before.nodes}
    new = {n.name: n for n in after.nodes}
    for name in list(old) + [n for n in new if n not in old]:
        a = Counter(op.render() for op in old[name].graph.nodes) if name in old else Counter()
        b = Counter(op.render() for op in new[name].graph.nodes) if name in new else Counter()
        if name not in new:
            lines.append(f"{name}: removed")
            continue
        added, removed = b - a, a - b
        status = "new " if name not in old else ""
        parts = [f"+{k}" for k in sorted(added.elements())] + [f"-{k}" for k in sorted(removed.elements())]
        if parts or status:
            lines.append(f"{status}{name}: " + (" ".join(parts) if parts else "unchanged"))
    before_ch = {c.name for c in before.channels}
    for c in after.channels:
        if c.name not in before_ch:
            lines.append(f"new channel {c.name} ({c.kind})")
    return lines
