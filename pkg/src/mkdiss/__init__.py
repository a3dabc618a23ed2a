"""Vorticity diagnostics for the two-ring collision problem."""
__version__ = "0.1.0"
