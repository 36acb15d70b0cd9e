"""Ellipsoid invariant certification for linear controller programs."""

__version__ = "0.1.0"
