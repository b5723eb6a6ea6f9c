"""Spectral laboratory for the kinetic-to-fluid limit on the torus."""

__version__ = "0.1.0"
