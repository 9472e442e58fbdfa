"""Convergence Sim Experiment Package"""

from .index import run, simulate_losses, validate

__all__ = ["run", "validate", "simulate_losses"]
