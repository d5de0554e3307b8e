"""Stability, gains and certificates for linear positive time-delay systems."""

__version__ = "0.1.0"
