"""Gauge fields and Yang-Mills vacua on endomorphism algebras of vector bundles."""

__version__ = "0.1.0"
