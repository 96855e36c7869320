"""Desk-scale cooperative mini-car C-ITS stack and simulator."""

__version__ = "0.1.0"
