"""Resilience toolkit for a two-line fuel delivery network."""

__version__ = "0.1.0"
