"""Numerical laboratory for workplace-design augmentation economics."""

__version__ = "0.1.0"
