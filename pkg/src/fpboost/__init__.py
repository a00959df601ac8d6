"""Boosted fixed-point iterations for eigenvectors and symmetric games."""

__version__ = "0.1.0"
