"""Geometry, certificates and realizations for synchronous quantum correlations C_q^s(3,2)."""

__version__ = "0.1.0"
