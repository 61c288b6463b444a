"""Simulation and limit theory for the two-dimensional stepping stone model."""

__version__ = "0.1.0"
