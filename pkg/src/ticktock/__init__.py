"""Exact sparse simulation of discrete space-time unitary radiator models."""

__version__ = "0.1.0"
