"""Exact-precision experiments with Toeplitz operators on Fock-Sobolev spaces."""

__version__ = "0.1.0"
