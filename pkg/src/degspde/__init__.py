"""
Spectral Galerkin simulation of a stochastic phase-field equation with
degenerate multiplicative noise and a singular potential.

Modules
-------
spectral      eigenbasis, collocation grids, fractional powers
potentials    mobility, singular potentials and their regularisation
noise         the noise coefficient, its inverse and derivative
solver        splitting scheme, tangent process, drifted dynamics
experiments   monitors, derivative estimator, irreducibility, ergodicity, separation
cli           command-line runner
"""

__version__ = "0.1.0"
