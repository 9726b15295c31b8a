"""Intrinsic Gaussian process kriging."""
__version__ = "0.1.0"
