"""Numerical laboratory for Bers metrics on a closed genus-2 surface."""

__version__ = "0.1.0"
