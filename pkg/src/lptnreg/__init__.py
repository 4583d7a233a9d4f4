"""Robust Bayesian linear regression with log-Pareto-tailed normal errors."""

__version__ = "0.1.0"
