"""Finite element solver for 2D nonlinear stochastic elastic waves."""

__version__ = "0.1.0"
