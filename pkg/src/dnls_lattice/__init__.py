"""Spectral and scattering theory of discrete Schrodinger operators on Z, and DNLS standing-wave stability."""

__version__ = "0.1.0"
