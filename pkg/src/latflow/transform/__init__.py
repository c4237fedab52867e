"""Monotonicity analysis and the rewrite rules."""

from .analysis import (
    EdgeRef,
    MonotonicityReport,
    OpClass,
    UnknownFunctionProperties,
    Verdict,
    analyze_monotonicity,
    classify,
)
from .rules import (
    PreconditionFailed,
    TransformError,
    UnsafeCut,
    carried_lattice,
    cut_flow,
    elide_subaggregation,
    fuse_append,
    insert_odiff_append,
    insert_odiff_append_in,
    push_groupby_through_join,
    push_through_odiff,
    replicate_with_broadcast,
    upgrade_to_bp,
    upgrade_to_ssiv,
)
from .script import RULES, RewriteRule, ScriptFailed, ScriptStep, apply_rule, diff_summary, parse_script, run_script
