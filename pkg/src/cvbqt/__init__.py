"""Continuous-variable bidirectional teleportation on weighted cluster states."""

__version__ = "0.1.0"
