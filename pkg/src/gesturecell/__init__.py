"""Simulated mm-wave radar gesture control of a 6-DoF arm on a linear guide."""

__version__ = "0.1.0"
