"""Disordered chains with long-range hopping: spectra, transport and ensemble sweeps."""

__version__ = "0.1.0"
