"""Numerical Chern-Ricci flow on Hermitian model manifolds."""

__version__ = "0.1.0"
