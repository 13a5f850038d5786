"""Numerical checks for arithmetic transference over Z_N."""

__version__ = "0.1.0"
