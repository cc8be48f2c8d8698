"""Streaming randomness audits for annealer-derived bit streams."""

__version__ = "0.1.0"
