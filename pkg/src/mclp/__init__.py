"""Exact solver and certificate checker for constant-coefficient continuous linear programs."""

__version__ = "0.1.0"
