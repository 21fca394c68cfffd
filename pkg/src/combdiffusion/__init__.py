"""Dirac-comb diffusion laboratory."""
__version__ = "0.1.0"
