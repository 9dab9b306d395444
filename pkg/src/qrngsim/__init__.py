"""Simulator and statistics toolkit for a two-detector flip/hold quantum RNG."""

__version__ = "0.1.0"
