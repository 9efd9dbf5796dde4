"""Spectral gaps and reflection-induced edge modes in recursively tiled 1D media."""

__version__ = "0.1.0"
