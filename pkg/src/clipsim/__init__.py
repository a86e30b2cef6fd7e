"""Secure federated learning simulator with client-side invariant pruning for stragglers."""

__version__ = "0.1.0"
