"""Depth Geometry

Pinhole / ground-plane closed forms and the depth-error trends they imply
when the camera height changes between training and testing.

Conventions: camera frame with +y toward the ground. A pixel (u, v) at depth
z back-projects to X = A [u, v, 1]^T z + B with A = R^-1 K^-1 and
B = -R^-1 T. The ground is the plane X . n = H with n = (0, cos d, sin d)
for camera pitch d (n = (0, 1, 0) for a level camera).
"""

from __future__ import annotations

import logging
import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .shared.errors import BehindCameraError, HorizonError, InputError
from .shared.schemas import CameraModel, DetectionGeom, SyntheticScene, TrendKind, TrendRow
from .shared.utils import spawn_seeds

logger = logging.getLogger("depth-geometry")

ArrayLike = Union[float, np.ndarray]

DEFAULT_Z_MAX = 60.0
DEFAULT_Z_MIN = 0.0

# ray slopes below this count as parallel to the ground
HORIZON_EPS = 1e-12


def project(cam: CameraModel, point: Sequence[float]) -> Tuple[float, float, float]:
    """
    Pinhole projection z [u, v, 1]^T = K (R X + T).

    Args:
        cam: Camera model
        point: 3D point in metres

    Returns:
        (u, v, z): pixel coordinates and camera depth

    Raises:
        BehindCameraError: if the point is not in front of the camera
    """
    cam_point = cam.rotation @ np.asarray(point, dtype=float) + cam.translation
    z = float(cam_point[2])
    if z <= 0.0:
        raise BehindCameraError(f"point at depth {z} is not in front of the camera")
    pixel = cam.K @ cam_point / z
    return float(pixel[0]), float(pixel[1]), z


def _plane_normal(cam: CameraModel) -> np.ndarray:
    return np.array([0.0, math.cos(cam.pitch), math.sin(cam.pitch)])


def ground_depth(cam: CameraModel, u: float, v: float) -> float:
    """
    Depth at which the ray of pixel (u, v) meets the ground plane.

    z = ReLU(H - b2 cos d - b3 sin d) / ((a2 . p) cos d + (a3 . p) sin d)
    with p = (u, v, 1); for d = 0 this is (H - b2) / (a21 u + a22 v + a23).

    Raises:
        HorizonError: if the ray is parallel to or points away from the ground
    """
    normal = _plane_normal(cam)
    pixel = np.array([u, v, 1.0])
    denominator = float(normal @ (cam.A @ pixel))
    if denominator <= HORIZON_EPS:
        raise HorizonError(f"pixel ({u}, {v}) is at or above the horizon")
    numerator = cam.H - float(normal @ cam.B)
    return max(numerator, 0.0) / denominator


def ground_depth_simple(cam: CameraModel, v: float) -> float:
    """Rotation-free form z = ReLU(H - b2) / ((v - cv) / f); pitch is ignored."""
    denominator = (v - cam.cv) / cam.f
    if denominator <= 0.0:
        raise HorizonError(f"row {v} is at or above the horizon row {cam.cv}")
    return max(cam.H - float(cam.B[1]), 0.0) / denominator


def ray_plane_depth(cam: CameraModel, u: float, v: float) -> float:
    """
    Ray / ground-plane intersection by explicit geometry.

    Intersects the unit-direction ray from the camera centre with the
    plane and projects the hit point back into the camera to read its depth.
    """
    centre = -cam.rotation.T @ cam.translation
    direction = cam.rotation.T @ np.linalg.solve(cam.K, np.array([u, v, 1.0]))
    direction = direction / np.linalg.norm(direction)
    normal = _plane_normal(cam)
    facing = float(normal @ direction)
    if facing <= HORIZON_EPS:
        raise HorizonError(f"ray of pixel ({u}, {v}) never meets the ground")
    t = max(cam.H - float(normal @ centre), 0.0) / facing
    hit = centre + t * direction
    return float((cam.rotation @ hit + cam.translation)[2])


def bottom_center(det: DetectionGeom) -> Tuple[float, float]:
    """Projected bottom centre: u_b = u_c, v_b = v_c + h2d/2 + alpha (v_c - v_c2d)."""
    return det.uc, det.vc + 0.5 * det.h2d + det.alpha * (det.vc - det.vc2d)


def _merge(z_reg: np.ndarray, z_ground: np.ndarray) -> np.ndarray:
    valid = np.isfinite(z_ground) & (z_ground > 0.0)
    return np.where(valid, 0.5 * (z_reg + np.where(valid, z_ground, 0.0)), z_reg)


def merge_depth(z_reg: float, z_ground: Optional[float]) -> float:
    """
    Average of the regressed and ground depths.

    A missing, non-finite or non-positive ground depth falls back to the
    regressed depth alone.
    """
    if z_ground is None:
        return float(z_reg)
    return float(_merge(np.asarray(z_reg, dtype=float), np.asarray(z_ground, dtype=float)))


def ground_depth_at_bottom(cam: CameraModel, det: DetectionGeom) -> float:
    """Ground depth at the detection's estimated bottom centre."""
    ub, vb = bottom_center(det)
    return ground_depth(cam, ub, vb)


def merged_depth(cam: CameraModel, det: DetectionGeom) -> float:
    """Merge the detection's regressed depth with its ground depth."""
    try:
        z_ground: Optional[float] = ground_depth_at_bottom(cam, det)
    except HorizonError:
        logger.debug("bottom centre above the horizon; using regressed depth")
        z_ground = None
    return merge_depth(det.z_reg, z_ground)


def default_beta(cam: CameraModel, z_max: float = DEFAULT_Z_MAX, z_min: float = DEFAULT_Z_MIN) -> float:
    """Slope of the linear depth-from-row model spanning [z_min, z_max] below the principal row."""
    rows = cam.image_h - cam.cv
    if rows <= 0.0:
        raise InputError("image height must exceed the principal row")
    return (z_max - z_min) / rows


def predicted_trend(
    kind: TrendKind,
    cam: CameraModel,
    delta_h: float,
    v_b: Optional[ArrayLike] = None,
    z: Optional[ArrayLike] = None,
    beta: Optional[float] = None,
) -> ArrayLike:
    """
    First-order mean depth error after a camera-height change delta_h.

    ground:    ReLU(1 / (v_b - cv)) * f * delta_h  (grows with delta_h)
    regressed: -(beta / z) * f * delta_h           (falls with delta_h)

    Args:
        kind: Estimator type
        cam: Camera at training height
        delta_h: Height change in metres
        v_b: Bottom-centre row(s) (ground kind)
        z: Object depth(s) (regressed kind)
        beta: Regression slope; default_beta(cam) when omitted

    Returns:
        Expected depth error in metres, shaped like v_b or z
    """
    kind = TrendKind(kind)
    if kind == TrendKind.GROUND:
        if v_b is None:
            raise InputError("ground trend needs the bottom-centre row v_b")
        gap = np.asarray(v_b, dtype=float) - cam.cv
        inverse = np.where(gap > 0.0, 1.0 / np.where(gap > 0.0, gap, 1.0), 0.0)
        value = inverse * cam.f * delta_h
    else:
        depth = None if z is None else np.asarray(z, dtype=float)
        if depth is None or np.any(depth <= 0.0):
            raise InputError("regressed trend needs a positive depth z")
        beta = default_beta(cam) if beta is None else beta
        if beta <= 0.0:
            raise InputError("beta must be positive")
        value = -(beta / depth) * cam.f * delta_h
    return float(value) if value.ndim == 0 else value


def normalized_focal(f: float, image_h: float) -> float:
    """Focal length relative to half the image height, 2 f / H."""
    if f <= 0.0 or image_h <= 0.0:
        raise InputError("focal length and image height must be positive")
    return 2.0 * f / image_h


def focal_scale(f_src: float, h_src: float, f_dst: float, h_dst: float) -> float:
    """Depth correction between datasets: ratio of normalized focal lengths."""
    return normalized_focal(f_src, h_src) / normalized_focal(f_dst, h_dst)


def _ground_point(cam: CameraModel, height: float, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """World points on the plane X . n = height at lateral x and forward z."""
    y = (height - z * math.sin(cam.pitch)) / math.cos(cam.pitch)
    return np.stack([x, y, z], axis=-1)


def _project_points(cam: CameraModel, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    cam_points = points @ cam.rotation.T + cam.translation
    z = cam_points[:, 2]
    if np.any(z <= 0.0):
        raise BehindCameraError("scene point is not in front of the camera")
    pixels = cam_points @ cam.K.T / z[:, None]
    return pixels[:, 0], pixels[:, 1], z


def _ground_depth_points(cam: CameraModel, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Vectorized ground_depth; NaN where the ray misses the ground."""
    normal = _plane_normal(cam)
    pixels = np.stack([u, v, np.ones_like(u)], axis=-1)
    denominator = pixels @ (normal @ cam.A)
    numerator = max(cam.H - float(normal @ cam.B), 0.0)
    below = denominator > HORIZON_EPS
    safe = np.where(below, denominator, 1.0)
    return np.where(below, numerator / safe, np.nan)


def trend_sim(
    cam: CameraModel,
    height_deltas: Sequence[float],
    scene: SyntheticScene,
    beta: Optional[float] = None,
    noise_sigma: float = 1.0,
    trials: int = 200,
    seed: int = 0,
) -> List[TrendRow]:
    """
    Monte-Carlo depth errors of ground, regressed and merged estimators.

    Every trial places scene objects on the ground, then for each height
    change:
    - ground: plane at H + dh queried at the bottom pixel seen at training
      height (the first-order model), plus noise
    - ground exact: plane at H + dh queried at the shifted bottom pixel,
      plus the same noise; this keeps the dh / z term the first-order model
      drops
    - regressed: true depth plus noise minus beta times the row shift of
      the projected centre
    - merged: merge_depth of the two
    Trials reuse their objects and noise across height changes.

    Returns:
        One TrendRow per height change; se is the largest of the three
        standard errors and ground_residual is the exact ground error minus
        the closed-form trend.
    """
    if trials < 2:
        raise InputError("trend simulation needs at least two trials")
    deltas = [float(dh) for dh in height_deltas]
    if deltas and scene.z_min <= max(abs(dh) for dh in deltas):
        raise InputError("object depths must exceed every height change")
    for dh in deltas:
        if cam.H + dh <= 0.0:
            raise InputError(f"camera height change {dh} puts the camera below the ground")
    beta = default_beta(cam) if beta is None else beta
    raised = [cam.model_copy(update={"H": cam.H + dh}) for dh in deltas]
    lift = np.array([0.0, scene.object_height / 2.0, 0.0])

    errors = np.zeros((len(deltas), trials, 3))
    exact_errors = np.zeros((len(deltas), trials))
    residuals = np.zeros((len(deltas), trials))
    for trial, child in enumerate(spawn_seeds(seed, trials)):
        rng = np.random.default_rng(child)
        xs = rng.uniform(scene.x_min, scene.x_max, size=scene.n_objects)
        zs = rng.uniform(scene.z_min, scene.z_max, size=scene.n_objects)
        noise_ground = rng.normal(0.0, noise_sigma, size=scene.n_objects)
        noise_reg = rng.normal(0.0, noise_sigma, size=scene.n_objects)

        bottom = _ground_point(cam, cam.H, xs, zs)
        u_b, v_b, depth = _project_points(cam, bottom)
        v_centre = _project_points(cam, bottom - lift)[1]
        for k, dh in enumerate(deltas):
            shifted_bottom = _ground_point(cam, cam.H + dh, xs, zs)
            u_bs, v_bs, depth_s = _project_points(cam, shifted_bottom)
            v_shifted = _project_points(cam, shifted_bottom - lift)[1]
            z_ground = _ground_depth_points(raised[k], u_b, v_b) + noise_ground
            z_reg = depth + noise_reg - beta * (v_shifted - v_centre)
            z_merged = _merge(z_reg, z_ground)
            err = np.stack([z_ground - depth, z_reg - depth, z_merged - depth], axis=1)
            errors[k, trial] = np.nanmean(err, axis=0)
            exact = _ground_depth_points(raised[k], u_bs, v_bs) + noise_ground - depth_s
            exact_errors[k, trial] = np.nanmean(exact)
            residuals[k, trial] = np.nanmean(exact - predicted_trend(TrendKind.GROUND, cam, dh, v_b=v_b))

    rows = []
    for k, dh in enumerate(deltas):
        means = errors[k].mean(axis=0)
        ses = errors[k].std(axis=0, ddof=1) / math.sqrt(trials)
        rows.append(
            TrendRow(
                dh=dh,
                mean_err_ground=float(means[0]),
                mean_err_regressed=float(means[1]),
                mean_err_merged=float(means[2]),
                se=float(ses.max()),
                ground_residual=float(residuals[k].mean()),
                mean_err_ground_exact=float(exact_errors[k].mean()),
            )
        )
        logger.debug(f"dh={dh:+.3f}: ground={means[0]:.4f} regressed={means[1]:.4f} merged={means[2]:.4f}")
    return rows
