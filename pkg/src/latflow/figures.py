"""The reference programs shipped with the package and the run variants built from them."""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Optional

from .ir.deploy import Deployment, load_deployment
from .transform import apply_rule, cut_flow, replicate_with_broadcast

FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig8_elided")

# run variant -> corpus deployment
VARIANTS = {
    "orig": "fig2",
    "bp": "fig3",
    "ssiv": "fig4",
    "pushed": "fig5",
    "decoupled_server": "fig6",
    "decoupled_client": "fig7",
    "replicated": "fig8",
    "replicated_elided": "fig8_elided",
}

# test-only: the original fold pipeline with a network cut the analysis refuses
FORCED_CUT = "orig_cut"

CORPUS_REPLICAS = 3


def corpus_dir() -> Path:
    return Path(str(resources.files("latflow") / "corpus"))


def corpus_file(name: str) -> Path:
    return corpus_dir() / name


def load_figure(name: str) -> Deployment:
    if name not in FIGURES:
        raise KeyError(f"unknown figure {name!r}; choose from {', '.join(FIGURES)}")
    return load_deployment(corpus_file(f"{name}.yaml"))


def load_variant(variant: str, replicas: Optional[int] = None) -> Deployment:
    """Deployment for a run variant; ``replicas`` other than the corpus's 3 is built by rewriting."""
    if variant == FORCED_CUT:
        return cut_flow(load_figure("fig2"), "Upstream", force=True)
    if variant not in VARIANTS:
        raise KeyError(f"unknown variant {variant!r}; choose from {', '.join(list(VARIANTS) + [FORCED_CUT])}")
    if variant.startswith("replicated") and replicas is not None and replicas != CORPUS_REPLICAS:
        d = replicate_with_broadcast(load_figure("fig6"), "server", replicas)
        if variant == "replicated_elided":
            d = apply_rule(d, "elide_subaggregation", {})
        return d
    return load_figure(VARIANTS[variant])
