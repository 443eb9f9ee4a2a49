"""Pseudospectral tools for the slow passage through a Turing bifurcation."""

__version__ = "0.1.0"
