"""
mono3d-theory-kit - Shared Package

This package contains the schemas, exceptions and helper functions used
across all library modules and experiments.
"""

from .errors import *  # noqa: F401,F403
from .schemas import *  # noqa: F401,F403
from .utils import *  # noqa: F401,F403

__all__ = []
