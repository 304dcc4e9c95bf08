"""Numerical checks for geometric Kramers-Fokker-Planck operators."""

__version__ = "0.1.0"
