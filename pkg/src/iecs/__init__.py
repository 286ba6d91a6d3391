"""Simulation lab for harmonic-broadcast nVoD with implicit error correction and subchannels."""

__version__ = "0.1.0"
