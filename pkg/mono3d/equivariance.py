"""Equivariance

Scale-equivariant steerable (SES) convolution and the measurements around it.

Filters are Hermite-Gaussian functions

    psi_{sigma,n,m}(u, v) = (A / sigma^2) He_n(u / sigma) He_m(v / sigma)
                            exp(-(u^2 + v^2) / sigma^2)

sampled on a k x k grid. A bank samples the same basis at sigma = base / s
for every scale s and combines it with one weight vector, so

    T_s(h) * Psi_sigma == T_s[h * Psi_{sigma / s}]

up to sampling. A is fixed per (n, m) so the filter has unit L2 norm at the
base sigma; with the 1 / sigma^2 factor this keeps the identity free of
scale-dependent gain.

T_s is the rescale about the image centre: out(x) = img(c + (x - c) / s),
bilinear with edge clamping.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import hermite_e
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .shared.errors import InputError, NumericalError
from .shared.schemas import EquivarianceReport, Image2D, ScaleFilterBank, ScaleStack

logger = logging.getLogger("equivariance")

FeatureMap = Union[np.ndarray, ScaleStack]
Featurizer = Callable[[Image2D], FeatureMap]

SIGMA_MATCH_RTOL = 1e-3
LOG_POLAR_R_MIN = 1.0
SSIM_WINDOW_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def hermite(n: int, x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Probabilist's Hermite polynomial He_n(x): He_0 = 1, He_1 = x, He_2 = x^2 - 1."""
    if n < 0:
        raise InputError("Hermite order must be non-negative")
    value = hermite_e.hermeval(np.asarray(x, dtype=float), [0.0] * n + [1.0])
    return float(value) if np.ndim(value) == 0 else value


def _grid_coordinates(size: int) -> np.ndarray:
    if size < 1 or size % 2 == 0:
        raise InputError(f"filter size must be odd and positive, got {size}")
    radius = size // 2
    return np.arange(-radius, radius + 1, dtype=float)


def _factor(order: int, sigma: float, coords: np.ndarray) -> np.ndarray:
    return np.asarray(hermite(order, coords / sigma)) * np.exp(-(coords**2) / sigma**2)


def steerable_factors(
    sigma: float, n: int, m: int, size: int, normalize_at: Optional[float] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Separable factors of a steerable filter.

    Returns:
        (column factor over v, row factor over u); their outer product is
        the filter
    """
    if sigma <= 0.0:
        raise InputError("sigma must be positive")
    if n < 0 or m < 0:
        raise InputError("Hermite orders must be non-negative")
    coords = _grid_coordinates(size)
    ref = sigma if normalize_at is None else normalize_at
    ref_norm = np.linalg.norm(_factor(m, ref, coords)) * np.linalg.norm(_factor(n, ref, coords))
    if ref_norm == 0.0:
        raise InputError(f"basis ({n}, {m}) vanishes on a {size}x{size} grid")
    amplitude = ref**2 / ref_norm
    return (amplitude / sigma**2) * _factor(m, sigma, coords), _factor(n, sigma, coords)


def steerable_basis(
    sigma: float, n: int, m: int, size: int, normalize_at: Optional[float] = None
) -> np.ndarray:
    """
    k x k Hermite-Gaussian filter indexed [v, u].

    Args:
        sigma: Scale of the filter
        n: Hermite order along u (columns)
        m: Hermite order along v (rows)
        size: Odd side length
        normalize_at: Sigma at which A gives unit L2 norm; the filter's own
            sigma when omitted

    Returns:
        np.ndarray: Filter of shape (size, size)
    """
    column, row = steerable_factors(sigma, n, m, size, normalize_at)
    return np.outer(column, row)


def basis_orders(max_order: int) -> List[Tuple[int, int]]:
    """All (n, m) with n + m <= max_order, grouped by total order."""
    if max_order < 0:
        raise InputError("max_order must be non-negative")
    return [(n, total - n) for total in range(max_order + 1) for n in range(total, -1, -1)]


def make_filter_bank(
    scales: Sequence[float],
    base_sigma: float = 1.0,
    max_order: int = 2,
    size: int = 7,
    seed: int = 0,
) -> ScaleFilterBank:
    """
    Build an SES bank with sigma_i = base_sigma / scales[i] and seeded weights.

    Args:
        scales: Scale factors, one filter per factor
        base_sigma: Sigma at scale 1
        max_order: Highest total Hermite order
        size: Odd filter side length
        seed: Seed of the shared weight vector

    Returns:
        ScaleFilterBank
    """
    scales = tuple(float(s) for s in scales)
    if not scales or min(scales) <= 0.0:
        raise InputError("scales must be a non-empty list of positive factors")
    if len(set(scales)) != len(scales):
        raise InputError("scales must be distinct")
    orders = basis_orders(max_order)
    sigmas = tuple(base_sigma / s for s in scales)
    basis = np.stack(
        [np.stack([steerable_basis(sigma, n, m, size, normalize_at=base_sigma) for n, m in orders]) for sigma in sigmas]
    )
    weights = np.random.default_rng(seed).normal(0.0, 1.0, size=len(orders))
    logger.debug(f"filter bank: sigmas={sigmas} orders={orders} size={size}")
    return ScaleFilterBank(scales=scales, sigmas=sigmas, orders=tuple(orders), basis=basis, weights=weights)


def bank_filters(bank: ScaleFilterBank) -> np.ndarray:
    """Per-scale filters sum_k w_k psi_k, shape (n_scales, k, k)."""
    return np.einsum("k,skij->sij", bank.weights, bank.basis)


def combined_filter(bank: ScaleFilterBank, sigma: float) -> np.ndarray:
    """The bank's weighted filter sampled at an arbitrary sigma."""
    filters = [steerable_basis(sigma, n, m, bank.size, normalize_at=bank.base_sigma) for n, m in bank.orders]
    return np.einsum("k,kij->ij", bank.weights, np.stack(filters))


def _check_fits(image: Image2D, size: int) -> None:
    if min(image.grid.shape) < size:
        raise InputError(f"image {image.grid.shape} is smaller than the {size}x{size} filter")


def _convolve(grid: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return ndimage.convolve(grid, kernel, mode="constant", cval=0.0)


def ses_convolve(image: Image2D, bank: ScaleFilterBank) -> ScaleStack:
    """
    Multi-scale convolution: one same-padded (zero) feature map per scale.

    Linear in both the image and the bank weights.
    """
    _check_fits(image, bank.size)
    maps = np.stack([_convolve(image.grid, kernel) for kernel in bank_filters(bank)])
    return ScaleStack(sigmas=bank.sigmas, maps=maps)


def vanilla_convolve(image: Image2D, bank: ScaleFilterBank) -> np.ndarray:
    """Single-scale convolution with the bank's filter at its base sigma."""
    _check_fits(image, bank.size)
    return _convolve(image.grid, combined_filter(bank, bank.base_sigma))


def scale_project(stack: Union[ScaleStack, Sequence[np.ndarray]]) -> Image2D:
    """Elementwise max over the scale dimension."""
    if isinstance(stack, ScaleStack):
        maps = stack.maps
    else:
        arrays = [np.asarray(m, dtype=float) for m in stack]
        if not arrays:
            raise InputError("cannot project an empty stack")
        if len({a.shape for a in arrays}) != 1:
            raise InputError("stack maps must share one shape")
        maps = np.stack(arrays)
    if maps.shape[0] == 0:
        raise InputError("cannot project an empty stack")
    return Image2D(grid=maps.max(axis=0))


def _rescale_grid(grid: np.ndarray, s: float) -> np.ndarray:
    if s <= 0.0:
        raise InputError("scale factor must be positive")
    if s == 1.0:
        return grid.copy()
    rows, cols = grid.shape
    centre = np.array([(rows - 1) / 2.0, (cols - 1) / 2.0])
    yy, xx = np.meshgrid(np.arange(rows, dtype=float), np.arange(cols, dtype=float), indexing="ij")
    coords = np.stack([centre[0] + (yy - centre[0]) / s, centre[1] + (xx - centre[1]) / s])
    return ndimage.map_coordinates(grid, coords, order=1, mode="nearest")


def rescale(image: Image2D, s: float) -> Image2D:
    """
    T_s: bilinear rescale about the centre keeping the image size.

    s < 1 shrinks the content, s > 1 enlarges it; outside samples clamp to
    the edge. s = 1 returns an exact copy.
    """
    return Image2D(grid=_rescale_grid(image.grid, s), spacing=image.spacing)


def rescale_stack(stack: ScaleStack, s: float) -> ScaleStack:
    """T_s applied to every channel; channel sigma is relabelled s * sigma."""
    maps = np.stack([_rescale_grid(m, s) for m in stack.maps])
    return ScaleStack(sigmas=tuple(s * sigma for sigma in stack.sigmas), maps=maps)


def _matched_channels(reference: ScaleStack, candidate: ScaleStack) -> List[Tuple[int, int]]:
    pairs = []
    for i, sigma in enumerate(reference.sigmas):
        for j, other in enumerate(candidate.sigmas):
            if math.isclose(sigma, other, rel_tol=SIGMA_MATCH_RTOL):
                pairs.append((i, j))
                break
    return pairs


def _squared_errors(transformed: FeatureMap, featurized: FeatureMap, s: float) -> Tuple[float, float]:
    """(||T_s Phi(h) - Phi(T_s h)||^2, ||T_s Phi(h)||^2) over comparable channels."""
    if isinstance(transformed, ScaleStack) != isinstance(featurized, ScaleStack):
        raise InputError("featurizer must return the same kind of output for every image")
    if isinstance(transformed, ScaleStack):
        pairs = _matched_channels(transformed, featurized)
        if not pairs:
            raise InputError(f"no bank sigma survives rescaling by {s}")
        ref = np.stack([transformed.maps[i] for i, _ in pairs])
        out = np.stack([featurized.maps[j] for _, j in pairs])
    else:
        ref, out = np.asarray(transformed, dtype=float), np.asarray(featurized, dtype=float)
        if ref.shape != out.shape:
            raise InputError("feature maps changed shape under rescaling")
    return float(np.sum((ref - out) ** 2)), float(np.sum(ref**2))


def equivariance_error(net: Featurizer, images: Sequence[Image2D], scales: Sequence[float]) -> EquivarianceReport:
    """
    Delta = mean over images of ||T_s Phi(h) - Phi(T_s h)||^2 / ||T_s Phi(h)||^2.

    ``net`` returns either a 2-D map or a ScaleStack; stacks are compared
    channel by channel after relabelling. Images whose reference map is all
    zero are excluded and counted.

    Args:
        net: Featurizer Phi
        images: Images h
        scales: Rescaling factors s

    Returns:
        EquivarianceReport with Delta per scale and their mean
    """
    if not images or not scales:
        raise InputError("need at least one image and one scale")
    per_scale = {}
    excluded = 0
    features = [net(image) for image in images]
    for s in scales:
        ratios = []
        for image, feature in zip(images, features):
            if isinstance(feature, ScaleStack):
                transformed: FeatureMap = rescale_stack(feature, s)
            else:
                transformed = _rescale_grid(np.asarray(feature, dtype=float), s)
            numerator, denominator = _squared_errors(transformed, net(rescale(image, s)), s)
            if denominator == 0.0:
                excluded += 1
                continue
            ratios.append(numerator / denominator)
        if not ratios:
            raise NumericalError(f"every feature map is zero at scale {s}")
        per_scale[float(s)] = float(np.mean(ratios))
    if excluded:
        logger.warning(f"excluded {excluded} all-zero feature maps from the equivariance error")
    return EquivarianceReport(per_scale=per_scale, mean=float(np.mean(list(per_scale.values()))), excluded=excluded)


def scale_identity_error(image: Image2D, bank: ScaleFilterBank, s: float) -> Tuple[float, float]:
    """
    Relative error of T_s(h) * Psi_sigma against T_s[h * Psi_{sigma/s}].

    Returns:
        (matched, mismatched): the identity with the rescaled filter, and the
        same comparison when the filter is kept at sigma
    """
    _check_fits(image, bank.size)
    sigma = bank.base_sigma
    lhs = _convolve(_rescale_grid(image.grid, s), combined_filter(bank, sigma))
    matched = _rescale_grid(_convolve(image.grid, combined_filter(bank, sigma / s)), s)
    mismatched = _rescale_grid(_convolve(image.grid, combined_filter(bank, sigma)), s)
    errors = []
    for reference in (matched, mismatched):
        norm = np.linalg.norm(reference)
        if norm == 0.0:
            raise NumericalError("identity reference map is all zero")
        errors.append(float(np.linalg.norm(lhs - reference) / norm))
    return errors[0], errors[1]


def _check_centre(shape: Tuple[int, int], center: Tuple[float, float]) -> None:
    cu, cv = center
    rows, cols = shape
    if not (0.0 < cu < cols - 1 and 0.0 < cv < rows - 1):
        raise InputError(f"centre {center} must lie strictly inside the {cols}x{rows} image")


def _log_step(shape: Tuple[int, int], center: Tuple[float, float], n_r: int) -> float:
    cu, cv = center
    rows, cols = shape
    r_max = min(cu, cv, cols - 1 - cu, rows - 1 - cv)
    if r_max <= LOG_POLAR_R_MIN or n_r < 2:
        raise InputError("centre is too close to the border for a log-polar grid")
    return math.log(r_max / LOG_POLAR_R_MIN) / (n_r - 1)


def log_polar(
    image: Image2D,
    center: Optional[Tuple[float, float]] = None,
    n_r: Optional[int] = None,
    n_theta: Optional[int] = None,
) -> Image2D:
    """
    Resample onto a (ln r, theta) grid about ``center`` = (cu, cv).

    Rows run from ln r = 0 (r = 1 px) to the largest radius inside the image,
    columns over theta in [0, 2 pi). Rescaling about the centre becomes a
    shift along rows, rotation a cyclic shift along columns. The returned
    spacing is the ln r step per row.
    """
    rows, cols = image.grid.shape
    if center is None:
        center = ((cols - 1) / 2.0, (rows - 1) / 2.0)
    _check_centre((rows, cols), center)
    n_r = n_r or min(rows, cols) // 2
    n_theta = n_theta or min(rows, cols)
    step = _log_step((rows, cols), center, n_r)
    radius = LOG_POLAR_R_MIN * np.exp(step * np.arange(n_r))
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    rr, tt = np.meshgrid(radius, theta, indexing="ij")
    coords = np.stack([center[1] + rr * np.sin(tt), center[0] + rr * np.cos(tt)])
    grid = ndimage.map_coordinates(image.grid, coords, order=1, mode="nearest")
    return Image2D(grid=grid, spacing=step)


def inverse_log_polar(
    lp: Image2D, shape: Tuple[int, int], center: Optional[Tuple[float, float]] = None
) -> Image2D:
    """Map a log-polar grid back to a rows x cols image (theta wraps around)."""
    rows, cols = shape
    if center is None:
        center = ((cols - 1) / 2.0, (rows - 1) / 2.0)
    _check_centre((rows, cols), center)
    n_r, n_theta = lp.grid.shape
    padded = np.concatenate([lp.grid, lp.grid[:, :1]], axis=1)
    yy, xx = np.meshgrid(np.arange(rows, dtype=float), np.arange(cols, dtype=float), indexing="ij")
    dy, dx = yy - center[1], xx - center[0]
    radius = np.maximum(np.hypot(dx, dy), LOG_POLAR_R_MIN)
    theta = np.mod(np.arctan2(dy, dx), 2.0 * np.pi)
    coords = np.stack([np.log(radius / LOG_POLAR_R_MIN) / lp.spacing, theta / (2.0 * np.pi) * n_theta])
    return Image2D(grid=ndimage.map_coordinates(padded, coords, order=1, mode="nearest"))


def ssim(a: np.ndarray, b: np.ndarray, data_range: Optional[float] = None) -> float:
    """Mean structural similarity with a Gaussian window."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InputError("SSIM inputs must share one shape")
    if data_range is None:
        data_range = max(a.max(), b.max()) - min(a.min(), b.min())
    data_range = data_range or 1.0
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2

    def blur(x: np.ndarray) -> np.ndarray:
        return ndimage.gaussian_filter(x, SSIM_WINDOW_SIGMA)

    mu_a, mu_b = blur(a), blur(b)
    var_a = blur(a * a) - mu_a**2
    var_b = blur(b * b) - mu_b**2
    cov = blur(a * b) - mu_a * mu_b
    index = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2))
    return float(index.mean())


def toy_images(n: int, size: int = 64, seed: int = 0) -> List[Image2D]:
    """
    Smooth images of one to three Gaussian blobs near the centre.

    Blob widths of 3-6 px (at size 64) keep bilinear resampling accurate.
    """
    if n < 1 or size < 16:
        raise InputError("need n >= 1 images of side >= 16")
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(np.arange(size, dtype=float), np.arange(size, dtype=float), indexing="ij")
    unit = size / 64.0
    images = []
    for _ in range(n):
        grid = np.zeros((size, size))
        for _ in range(int(rng.integers(1, 4))):
            cy, cx = rng.uniform(0.35 * size, 0.65 * size, size=2)
            width = rng.uniform(3.0, 6.0) * unit
            amplitude = rng.uniform(0.5, 1.5)
            grid += amplitude * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * width**2))
        images.append(Image2D(grid=grid))
    return images


def load_image(path: Union[str, Path]) -> Image2D:
    """Load an image file as a grayscale float grid in [0, 1]."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"image not found: {path}")
    try:
        with Image.open(path) as handle:
            grid = np.asarray(handle.convert("L"), dtype=float) / 255.0
    except UnidentifiedImageError as exc:
        raise InputError(f"cannot decode image {path}: {exc}") from exc
    return Image2D(grid=grid)
