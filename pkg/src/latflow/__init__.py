"""Lattice-typed dataflow programs: IR, rewrite rules, and a deterministic simulator."""

__version__ = "0.1.0"
