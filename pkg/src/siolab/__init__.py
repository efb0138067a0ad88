"""Desk-scale laboratory for singular integral operators on discretized boundaries."""

__version__ = "0.1.0"
