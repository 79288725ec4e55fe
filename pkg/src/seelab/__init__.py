"""Monte Carlo and verification toolkit for controlled stochastic evolution equations.

Spectral (Galerkin) state spaces, exponential-Euler simulation, least-squares
BSDE solvers, value and dynamic-programming estimates, a discrete smooth
variational principle and pointwise HJB/viscosity checks.
"""

__version__ = "0.1.0"
