"""Curl-free staggered semi-implicit finite-volume solver for two-phase flow.

Pressure-based semi-implicit scheme for a first-order hyperbolic two-phase
flow model with surface tension and hyperbolic (relaxation-based) viscosity.
The interface field and the rows of the distortion matrix are kept exactly
curl-free on a multiply-staggered Cartesian grid.
"""

__version__ = "0.1.0"
