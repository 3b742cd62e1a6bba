"""Transition fronts for two-species competition lattices in random time-dependent media."""
__version__ = "0.1.0"
