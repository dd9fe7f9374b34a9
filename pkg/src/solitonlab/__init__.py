"""Numerical companion for rotationally symmetric steady Ricci solitons in dimension three."""

__version__ = "0.1.0"
