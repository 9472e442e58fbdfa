"""Depth Trend Experiment Package"""

from .index import height_deltas, run, validate

__all__ = ["run", "validate", "height_deltas"]
