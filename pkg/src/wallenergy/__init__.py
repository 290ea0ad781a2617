"""Numerical laboratory for 1-D second-order phase-transition energies."""

__version__ = "0.1.0"
