"""Exact von Neumann pointer simulation for pre- and post-selected
finite-dimensional quantum systems."""

__version__ = "0.1.0"
