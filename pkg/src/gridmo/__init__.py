"""Moment-based stochastic optimal control of DERs in radial grids."""

__version__ = "0.1.0"
