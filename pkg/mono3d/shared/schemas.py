"""
Shared Schema Definitions for mono3d-theory-kit

This module defines the Pydantic models that represent the core data
structures used across all modules: boxes, pruning specifications, NMS
intermediate results, loss/noise specifications, camera models, filter banks
and experiment configurations. Numeric containers hold numpy arrays and are
validated on construction so that downstream code can rely on their
invariants.
"""

from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class PruneKind(str, Enum):
    """Pruning functions applied to pairwise overlaps."""
    HARD = "hard"
    LINEAR = "linear"
    EXPONENTIAL = "exponential"
    SIGMOIDAL = "sigmoidal"


class LossKind(str, Enum):
    """Losses compared in the convergence analysis."""
    L1 = "l1"
    L2 = "l2"
    DICE = "dice"


class TrendKind(str, Enum):
    """Depth estimators whose error trend is predicted."""
    GROUND = "ground"
    REGRESSED = "regressed"


class ExperimentCommand(str, Enum):
    """CLI subcommands."""
    NMS_COMPARE = "nms-compare"
    CONVERGENCE_SIM = "convergence-sim"
    DEPTH_TREND = "depth-trend"
    EQUIVARIANCE_CHECK = "equivariance-check"
    GIOU_TABLE = "giou-table"


# ---------------------------------------------------------------------------
# Boxes
# ---------------------------------------------------------------------------


class Box2D(BaseModel):
    """Axis-aligned image box in pixels."""
    model_config = ConfigDict(frozen=True)

    x1: float = 0.0
    y1: float = 0.0
    x2: float = 0.0
    y2: float = 0.0

    @model_validator(mode="after")
    def _check_corners(self) -> "Box2D":
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise ValueError(
                f"Box2D corners out of order: ({self.x1}, {self.y1}, {self.x2}, {self.y2})"
            )
        return self

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    @classmethod
    def from_list(cls, values: List[float]) -> "Box2D":
        if len(values) != 4:
            raise ValueError("box2d must have exactly four values [x1, y1, x2, y2]")
        x1, y1, x2, y2 = (float(v) for v in values)
        return cls(x1=x1, y1=y1, x2=x2, y2=y2)


class Box3D(BaseModel):
    """
    7-DoF 3D box with its projected 2D box and detection score.

    The vertical axis is y; yaw rotates the (x, z) footprint about it.
    """
    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "cx": 1.2,
                "cy": 1.6,
                "cz": 18.4,
                "l": 3.9,
                "w": 1.6,
                "h": 1.5,
                "yaw": 0.1,
                "score": 0.92,
                "box2d": [612.0, 170.0, 701.0, 228.0],
            }
        },
    )

    cx: float
    cy: float
    cz: float
    l: float = Field(gt=0)  # noqa: E741
    w: float = Field(gt=0)
    h: float = Field(gt=0)
    yaw: float = 0.0
    score: float = Field(default=1.0, ge=0.0, le=1.0)
    box2d: Box2D = Field(default_factory=Box2D)

    @field_validator("box2d", mode="before")
    @classmethod
    def _coerce_box2d(cls, value: Any) -> Any:
        if isinstance(value, (list, tuple)):
            return Box2D.from_list(list(value))
        return value

    @property
    def volume(self) -> float:
        return self.l * self.w * self.h


# ---------------------------------------------------------------------------
# NMS
# ---------------------------------------------------------------------------


class PruneSpec(BaseModel):
    """Pruning function p with threshold Nt and temperature tau."""
    model_config = ConfigDict(frozen=True)

    kind: PruneKind = PruneKind.LINEAR
    nt: float = Field(default=0.4, gt=0.0, lt=1.0)
    tau: Optional[float] = Field(default=None, gt=0.0)

    @model_validator(mode="after")
    def _check_tau(self) -> "PruneSpec":
        if self.kind in (PruneKind.EXPONENTIAL, PruneKind.SIGMOIDAL) and self.tau is None:
            raise ValueError(f"prune kind '{self.kind.value}' requires tau")
        return self


class ScoredBoxSet(BaseModel):
    """
    Score-sorted detections of one image.

    s is non-increasing, O is the IoU2D matrix in the same (sorted) order and
    perm maps each sorted position back to the caller's original index.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    s: np.ndarray
    O: np.ndarray  # noqa: E741
    perm: np.ndarray
    boxes: Tuple[Box3D, ...] = ()

    @model_validator(mode="after")
    def _check_invariants(self) -> "ScoredBoxSet":
        n = self.s.shape[0]
        if self.s.ndim != 1 or self.O.shape != (n, n) or self.perm.shape != (n,):
            raise ValueError("ScoredBoxSet shapes disagree")
        if n and np.any(np.diff(self.s) > 0):
            raise ValueError("scores must be sorted in non-increasing order")
        if not np.allclose(self.O, self.O.T, atol=1e-12):
            raise ValueError("overlap matrix must be symmetric")
        if np.any(self.O < 0) or np.any(self.O > 1):
            raise ValueError("overlaps must lie in [0, 1]")
        if n and not np.allclose(np.diag(self.O), 1.0):
            raise ValueError("overlap matrix must have a unit diagonal")
        return self

    @property
    def n(self) -> int:
        return int(self.s.shape[0])


class Grouping(BaseModel):
    """Disjoint groups of sorted indices; each group starts with its top box."""
    model_config = ConfigDict(frozen=True)

    groups: List[List[int]] = Field(default_factory=list)
    alpha: int = Field(default=100, ge=1)
    suppressed_overflow: List[int] = Field(default_factory=list)

    @property
    def tops(self) -> List[int]:
        return [group[0] for group in self.groups]


class RescoreResult(BaseModel):
    """Rescores in sorted order, the valid set in original indices, optional Jacobians."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    r: np.ndarray
    valid: List[int] = Field(default_factory=list)
    jac_s: Optional[np.ndarray] = None
    jac_O: Optional[np.ndarray] = None


class Assignment(BaseModel):
    """Per-box training targets for one image."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    labels: np.ndarray
    quality: np.ndarray
    matched_gt: List[Optional[int]] = Field(default_factory=list)


# ---------------------------------------------------------------------------
# Loss analysis
# ---------------------------------------------------------------------------


class NoiseLossSpec(BaseModel):
    """Loss kind under additive depth noise eta ~ N(0, sigma^2) for an object of length ell."""
    model_config = ConfigDict(frozen=True)

    kind: LossKind
    sigma: float = Field(ge=0.0)
    ell: float = Field(default=4.0, gt=0.0)


class SgdSimConfig(BaseModel):
    """
    Monte-Carlo SGD setup.

    Step sizes follow s_j = step_scale / j**step_power; the schedule must be
    square summable, so step_power has to exceed 1/2.
    """
    model_config = ConfigDict(frozen=True)

    dim: int = Field(default=4, ge=1)
    steps: int = Field(default=1000, ge=1)
    step_power: float = 1.0
    step_scale: float = Field(default=1.0, gt=0.0)
    trials: int = Field(default=10000, ge=1)
    seed: int = 0
    var_w0: float = Field(default=1.0, ge=0.0)
    var_wstar: float = Field(default=1.0, ge=0.0)
    workers: int = Field(default=1, ge=1)

    @field_validator("step_power")
    @classmethod
    def _square_summable(cls, value: float) -> float:
        if value <= 0.5:
            raise ValueError(
                f"step schedule 1/j^{value} is not square summable (power must exceed 0.5)"
            )
        return value

    @property
    def step_sizes(self) -> np.ndarray:
        j = np.arange(1, self.steps + 1, dtype=float)
        return self.step_scale / j**self.step_power

    @property
    def c1(self) -> float:
        """Sum of squared steps times E(h^T h) for unit-variance features."""
        return float(np.sum(self.step_sizes**2) * self.dim)

    @property
    def c2(self) -> float:
        return float(self.dim * (self.var_w0 + self.var_wstar))


# ---------------------------------------------------------------------------
# Depth geometry
# ---------------------------------------------------------------------------


class CameraModel(BaseModel):
    """
    Pinhole camera mounted at height H above a flat ground plane.

    Camera frame has +y toward the ground, so the ground is the plane y = H
    (tilted by pitch about the x axis when pitch != 0).
    """
    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {"f": 707.0, "cu": 600.0, "cv": 180.0, "H": 1.65, "image_h": 370.0}
        },
    )

    f: float = Field(default=707.0, gt=0.0)
    cu: float = 600.0
    cv: float = 180.0
    R: Tuple[Tuple[float, float, float], ...] = (
        (1.0, 0.0, 0.0),
        (0.0, 1.0, 0.0),
        (0.0, 0.0, 1.0),
    )
    T: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    H: float = Field(default=1.65, gt=0.0)
    pitch: float = 0.0
    image_h: float = Field(default=370.0, gt=0.0)

    @field_validator("R")
    @classmethod
    def _check_rotation(cls, value: Tuple[Tuple[float, ...], ...]) -> Tuple[Tuple[float, ...], ...]:
        rot = np.asarray(value, dtype=float)
        if rot.shape != (3, 3):
            raise ValueError("R must be 3x3")
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-9, rtol=0.0):
            raise ValueError("R must be orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > 1e-9:
            raise ValueError("R must have determinant 1")
        return value

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.f, 0.0, self.cu], [0.0, self.f, self.cv], [0.0, 0.0, 1.0]])

    @property
    def rotation(self) -> np.ndarray:
        return np.asarray(self.R, dtype=float)

    @property
    def translation(self) -> np.ndarray:
        return np.asarray(self.T, dtype=float)

    @property
    def A(self) -> np.ndarray:
        """A = R^-1 K^-1."""
        return self.rotation.T @ np.linalg.inv(self.K)

    @property
    def B(self) -> np.ndarray:
        """B = -R^-1 T."""
        return -self.rotation.T @ self.translation


class DetectionGeom(BaseModel):
    """Image-space quantities of one detection used for bottom-centre estimation."""
    model_config = ConfigDict(frozen=True)

    uc: float
    vc: float
    uc2d: float
    vc2d: float
    h2d: float = Field(gt=0.0)
    alpha: float = 0.0
    z_reg: float = 0.0


class SyntheticScene(BaseModel):
    """Objects standing on the ground for the depth-trend simulation."""
    model_config = ConfigDict(frozen=True)

    n_objects: int = Field(default=50, ge=1)
    z_min: float = Field(default=10.0, gt=0.0)
    z_max: float = 40.0
    x_min: float = -10.0
    x_max: float = 10.0
    object_height: float = Field(default=1.5, gt=0.0)

    @model_validator(mode="after")
    def _check_ranges(self) -> "SyntheticScene":
        if self.z_max <= self.z_min or self.x_max < self.x_min:
            raise ValueError("scene ranges must be increasing")
        return self


class TrendRow(BaseModel):
    """Mean depth errors at one camera-height change."""
    dh: float
    mean_err_ground: float
    mean_err_regressed: float
    mean_err_merged: float
    se: float
    ground_residual: float
    mean_err_ground_exact: float


# ---------------------------------------------------------------------------
# Equivariance
# ---------------------------------------------------------------------------


class Image2D(BaseModel):
    """Real-valued image grid."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: np.ndarray
    spacing: float = Field(default=1.0, gt=0.0)

    @field_validator("grid", mode="before")
    @classmethod
    def _check_grid(cls, value: np.ndarray) -> np.ndarray:
        value = np.asarray(value, dtype=float)
        if value.ndim != 2 or min(value.shape) < 3:
            raise ValueError("image grid must be 2-D with both sides >= 3")
        if not np.all(np.isfinite(value)):
            raise ValueError("image grid must be finite")
        return value


class ScaleFilterBank(BaseModel):
    """
    Hermite-Gaussian basis sampled at several scales plus one shared weight vector.

    sigmas[i] = base_sigma / scales[i]; basis has shape
    (n_scales, n_basis, size, size) and weights has shape (n_basis,).
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    scales: Tuple[float, ...]
    sigmas: Tuple[float, ...]
    orders: Tuple[Tuple[int, int], ...]
    basis: np.ndarray
    weights: np.ndarray

    @model_validator(mode="after")
    def _check_shapes(self) -> "ScaleFilterBank":
        if len(self.scales) != len(self.sigmas) or not self.scales:
            raise ValueError("bank needs one sigma per scale")
        if self.basis.shape[:2] != (len(self.sigmas), len(self.orders)):
            raise ValueError("basis must be indexed (scale, order, row, col)")
        if self.weights.shape != (len(self.orders),):
            raise ValueError("one weight per basis function")
        return self

    @property
    def size(self) -> int:
        return int(self.basis.shape[-1])

    @property
    def base_sigma(self) -> float:
        """Sigma of the unit-scale filter, at which every basis function has unit norm."""
        return float(self.sigmas[0] * self.scales[0])


class ScaleStack(BaseModel):
    """Per-scale feature maps tagged by the sigma that produced them."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    sigmas: Tuple[float, ...]
    maps: np.ndarray

    @model_validator(mode="after")
    def _check_shapes(self) -> "ScaleStack":
        if self.maps.ndim != 3 or self.maps.shape[0] != len(self.sigmas):
            raise ValueError("stack maps must be (n_scales, height, width)")
        return self


class EquivarianceReport(BaseModel):
    """Equivariance error per rescaling factor and averaged over factors."""

    per_scale: Dict[float, float]
    mean: float = Field(ge=0.0)
    excluded: int = Field(default=0, ge=0)


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


class ExperimentConfig(BaseModel):
    """Fields common to every CLI subcommand."""
    model_config = ConfigDict(extra="forbid")

    command: ExperimentCommand
    seed: int = 0
    output_path: Optional[str] = None


class NmsCompareConfig(ExperimentConfig):
    command: ExperimentCommand = ExperimentCommand.NMS_COMPARE
    boxes: Optional[str] = None
    gts: Optional[str] = None
    n_boxes: int = Field(default=20, ge=1)
    nt: float = Field(default=0.4, gt=0.0, lt=1.0)
    prune: PruneKind = PruneKind.LINEAR
    tau: Optional[float] = Field(default=0.5, gt=0.0)
    v: float = Field(default=0.3, ge=0.0, le=1.0)
    alpha: int = Field(default=100, ge=1)
    beta: float = Field(default=0.3, gt=0.0, lt=1.0)


class ConvergenceSimConfig(ExperimentConfig):
    command: ExperimentCommand = ExperimentCommand.CONVERGENCE_SIM
    sigma: float = Field(default=1.0, ge=0.0)
    ell: float = Field(default=4.0, gt=0.0)
    trials: int = Field(default=10000, ge=1)
    steps: int = Field(default=1000, ge=1)
    dim: int = Field(default=4, ge=1)
    mc_samples: int = Field(default=100000, ge=10000)
    workers: int = Field(default=1, ge=1)


class DepthTrendConfig(ExperimentConfig):
    command: ExperimentCommand = ExperimentCommand.DEPTH_TREND
    dh_min: float = -0.7
    dh_max: float = 0.76
    steps: int = Field(default=20, ge=1)
    trials: int = Field(default=200, ge=2)
    noise_sigma: float = Field(default=1.0, ge=0.0)
    beta: Optional[float] = Field(default=None, gt=0.0)
    camera: CameraModel = Field(default_factory=CameraModel)
    scene: SyntheticScene = Field(default_factory=SyntheticScene)

    @model_validator(mode="after")
    def _check_range(self) -> "DepthTrendConfig":
        if self.dh_max < self.dh_min:
            raise ValueError("dh_max must not be below dh_min")
        return self


class EquivarianceCheckConfig(ExperimentConfig):
    command: ExperimentCommand = ExperimentCommand.EQUIVARIANCE_CHECK
    scales: List[float] = Field(default_factory=lambda: [0.833, 0.909, 1.0])
    bank_scales: List[float] = Field(default_factory=lambda: [1 / 1.2, 1 / 1.1, 1.0])
    size: int = Field(default=7, ge=1)
    base_sigma: float = Field(default=1.0, gt=0.0)
    max_order: int = Field(default=2, ge=0)
    n_images: int = Field(default=20, ge=1)
    image_size: int = Field(default=64, ge=16)
    images: List[str] = Field(default_factory=list)


class GiouTableConfig(ExperimentConfig):
    command: ExperimentCommand = ExperimentCommand.GIOU_TABLE
    offsets: List[float] = Field(default_factory=lambda: [0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0])
    yaws: List[float] = Field(default_factory=lambda: [0.0, 0.3927, 0.7854])
    l: float = Field(default=1.0, gt=0.0)  # noqa: E741
    w: float = Field(default=1.0, gt=0.0)
    h: float = Field(default=1.0, gt=0.0)
    resolution: int = Field(default=64, ge=16)


CONFIG_TYPES: Dict[ExperimentCommand, type] = {
    ExperimentCommand.NMS_COMPARE: NmsCompareConfig,
    ExperimentCommand.CONVERGENCE_SIM: ConvergenceSimConfig,
    ExperimentCommand.DEPTH_TREND: DepthTrendConfig,
    ExperimentCommand.EQUIVARIANCE_CHECK: EquivarianceCheckConfig,
    ExperimentCommand.GIOU_TABLE: GiouTableConfig,
}
