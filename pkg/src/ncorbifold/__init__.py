"""Finite crossed-product spectral triples, Morita bitorsors and spectral distances on graphs."""

__version__ = "0.1.0"
