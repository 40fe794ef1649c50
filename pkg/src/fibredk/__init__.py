"""Fibred algebra over finite monoidal opfibrations, local triviality and K_0."""

__version__ = "0.1.0"
