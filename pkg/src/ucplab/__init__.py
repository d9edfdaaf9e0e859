"""Numerical laboratory for quantitative unique continuation at desk scale."""

__version__ = "0.1.0"
