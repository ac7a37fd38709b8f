"""Turbo equalization with iteration-varying MMSE DFEs and online prediction."""

__version__ = "0.1.0"
