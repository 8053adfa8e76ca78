"""Finite groupoids, Fell bundles, reduced C*-algebras, Morita certificates."""

__version__ = "0.1.0"
