"""Microstructural image fingerprints and classification benchmarks."""

__version__ = "0.1.0"
