"""Dissipative preparation of entangled states in driven Rydberg chains."""

__version__ = "0.1.0"
