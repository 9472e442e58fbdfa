"""gIoU Table Experiment Package"""

from .index import run, sweep, validate

__all__ = ["run", "validate", "sweep"]
