"""Weather sequence classification, stochastic generation and building cooling-load simulation."""

__version__ = "0.1.0"
