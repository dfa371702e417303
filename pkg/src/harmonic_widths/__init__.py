"""Widths of ellipsoids defined by elliptic operators, at desk scale."""

__version__ = "0.1.0"
