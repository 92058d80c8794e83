"""Variational quantum eigensolver driven by a quantum Gaussian filter."""

__version__ = "0.1.0"
