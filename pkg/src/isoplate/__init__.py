"""Proximal Galerkin solver for isometry-constrained Kirchhoff plates."""

__version__ = "0.1.0"
