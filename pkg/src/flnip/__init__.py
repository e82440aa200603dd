"""Texture-based image retrieval with the FLNIP descriptor, multi-scale
Gaussian features and genetic-algorithm distance fusion."""

__version__ = "0.1.0"
