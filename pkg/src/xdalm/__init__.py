"""Liability-driven portfolio optimisation under 2k-th moment and extreme-deviation risk."""

__version__ = "0.1.0"
