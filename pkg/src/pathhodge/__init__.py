"""Numerical path-space Hodge laboratory."""

__version__ = "0.1.0"
