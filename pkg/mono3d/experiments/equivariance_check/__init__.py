"""Equivariance Check Experiment Package"""

from .index import load_images, run, validate

__all__ = ["run", "validate", "load_images"]
