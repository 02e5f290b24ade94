"""Discrimination of von Neumann measurements: diamond distances, query counts,
unambiguous discrimination and adaptive-scheme checks."""

__version__ = "0.1.0"
