"""Ordering-based causal discovery for discrete data."""

__version__ = "0.1.0"
