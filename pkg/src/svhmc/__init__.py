"""Bayesian stochastic volatility estimation with Hamiltonian Monte Carlo."""

__version__ = "0.1.0"
