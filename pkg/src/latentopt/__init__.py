"""Latent-space day-ahead scheduling of multi-zone HVAC loads."""

__version__ = "0.1.0"
