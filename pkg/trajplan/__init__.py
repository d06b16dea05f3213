"""Corridor-constrained QP trajectory planning library."""

__version__ = "0.1.0"
