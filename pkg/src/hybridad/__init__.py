"""Distributed activity detection for cell-free hybrid near/far-field MIMO."""

__version__ = "0.1.0"
