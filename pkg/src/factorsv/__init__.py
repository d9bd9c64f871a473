"""Bayesian factor stochastic volatility models sampled by MCMC with interweaving."""

__version__ = "0.1.0"
