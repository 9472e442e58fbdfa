"""NMS Compare Experiment Package"""

from .index import compare_rescores, run, validate

__all__ = ["run", "validate", "compare_rescores"]
