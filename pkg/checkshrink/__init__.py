"""Empirical Bayes shrinkage predictions under check loss."""

__version__ = "0.1.0"
