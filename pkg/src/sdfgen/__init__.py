"""Hierarchical signed-distance-field shape generation."""

__version__ = "0.1.0"
