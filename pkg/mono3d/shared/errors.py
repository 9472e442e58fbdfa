"""
Exception hierarchy shared by every module.

Library functions raise these; experiment runners catch them and the CLI
maps them onto exit codes (InputError -> 2, NumericalError -> 3).
"""


class Mono3DError(Exception):
    """Base class for all library errors."""


class InputError(Mono3DError, ValueError):
    """Malformed or out-of-domain input."""


class GeometryError(InputError):
    """Geometry that a measure is undefined for (e.g. a zero-volume hull)."""


class BehindCameraError(InputError):
    """A point projected with non-positive depth."""


class NonDifferentiableError(InputError):
    """A Jacobian was requested for a non-differentiable pruning function."""


class NumericalError(Mono3DError, ArithmeticError):
    """A computation that cannot produce a finite result."""


class HorizonError(NumericalError):
    """Pixel ray at or above the horizon; it never meets the ground plane."""
