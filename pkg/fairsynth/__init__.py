"""Differentially private synthetic tabular data whose model is a fair maximum spanning tree."""

__version__ = "0.1.0"
