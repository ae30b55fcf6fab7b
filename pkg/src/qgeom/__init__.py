"""Quantum geometry of adiabatic response on exactly diagonalizable models."""
__version__ = "0.1.0"
