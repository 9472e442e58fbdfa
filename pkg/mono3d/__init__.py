"""
mono3d-theory-kit - Library Package

Numerical core for monocular 3D detection research: grouped differentiable
NMS, 3D box overlaps, loss-convergence analysis, ground-plane depth geometry
and scale-equivariant steerable filters.

Each module is a set of pure functions over the pydantic types in
``mono3d.shared.schemas``; the ``experiments`` package wraps them into the
CLI subcommands.
"""

__version__ = "0.1.0"

from . import depth_geometry, equivariance, geometry, loss_analysis, nms, target_loss
from .shared import errors, schemas, utils

__all__ = [
    "errors",
    "schemas",
    "utils",
    "geometry",
    "nms",
    "target_loss",
    "loss_analysis",
    "depth_geometry",
    "equivariance",
]
