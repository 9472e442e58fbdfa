"""NMS

Classical/Soft-NMS reference loop and the grouped, differentiable
matrix-form NMS used for training.

Pipeline for one image:
1. build_box_set: stable descending sort of scores, IoU2D matrix O in the
   same order
2. group_boxes: greedy unsupervised grouping (highest remaining box takes
   every remaining box overlapping it by more than Nt, capped at alpha)
3. groomed_rescore: per group r = clip((I - M o P) s), i.e. each member is
   reduced by p(o_{i,top}) * s_top
4. select_valid: keep boxes with r >= v

groomed_rescore_full solves the uncapped lower-triangular system
(I + P) r = s instead. rescore_jacobians / rescore_full_jacobians give the
analytic gradients through s and O with the clip acting as a gate.
"""

from __future__ import annotations

import logging
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import expit

from .geometry import overlap_matrix
from .shared.errors import InputError, NonDifferentiableError
from .shared.schemas import Box3D, Grouping, PruneKind, PruneSpec, RescoreResult, ScoredBoxSet

logger = logging.getLogger("nms")

ArrayLike = Union[float, np.ndarray]

DEFAULT_NT = 0.4
DEFAULT_V = 0.3
DEFAULT_ALPHA = 100


def prune(spec: PruneSpec, o: ArrayLike) -> ArrayLike:
    """
    Pruning function p(o), vectorized over overlaps.

    Args:
        spec: Pruning kind with threshold and temperature
        o: Overlap value(s) in [0, 1]

    Returns:
        p(o) in [0, 1] with the same shape as ``o``
    """
    o = np.asarray(o, dtype=float)
    if spec.kind == PruneKind.HARD:
        value = (o > spec.nt).astype(float)
    elif spec.kind == PruneKind.LINEAR:
        value = o.copy()
    elif spec.kind == PruneKind.EXPONENTIAL:
        value = 1.0 - np.exp(-(o**2) / spec.tau)
    elif spec.kind == PruneKind.SIGMOIDAL:
        value = expit((o - spec.nt) / spec.tau)
    else:
        raise InputError(f"Unknown prune kind: {spec.kind}")
    return float(value) if value.ndim == 0 else value


def prune_derivative(spec: PruneSpec, o: ArrayLike) -> ArrayLike:
    """Derivative p'(o); undefined for hard pruning."""
    o = np.asarray(o, dtype=float)
    if spec.kind == PruneKind.HARD:
        raise NonDifferentiableError("hard pruning has no derivative")
    if spec.kind == PruneKind.LINEAR:
        value = np.ones_like(o)
    elif spec.kind == PruneKind.EXPONENTIAL:
        value = (2.0 * o / spec.tau) * np.exp(-(o**2) / spec.tau)
    else:
        sig = expit((o - spec.nt) / spec.tau)
        value = sig * (1.0 - sig) / spec.tau
    return float(value) if value.ndim == 0 else value


def box_set_from_arrays(
    scores: Sequence[float],
    overlaps: np.ndarray,
    boxes: Sequence[Box3D] = (),
) -> ScoredBoxSet:
    """
    Sort scores (ties keep the original order) and permute O to match.

    Args:
        scores: Detection scores in caller order
        overlaps: n x n IoU2D matrix in caller order
        boxes: Optional boxes in caller order

    Returns:
        ScoredBoxSet in sorted order
    """
    scores = np.asarray(scores, dtype=float).reshape(-1)
    overlaps = np.asarray(overlaps, dtype=float).reshape(scores.size, scores.size)
    perm = np.argsort(-scores, kind="stable")
    sorted_overlaps = overlaps[np.ix_(perm, perm)].copy()
    np.fill_diagonal(sorted_overlaps, 1.0)
    sorted_boxes = tuple(boxes[i] for i in perm) if len(boxes) else ()
    return ScoredBoxSet(s=scores[perm], O=sorted_overlaps, perm=perm, boxes=sorted_boxes)


def build_box_set(boxes: Sequence[Box3D]) -> ScoredBoxSet:
    """ScoredBoxSet of detections, with O computed from their projected 2D boxes."""
    scores = [box.score for box in boxes]
    overlaps = overlap_matrix([box.box2d for box in boxes])
    return box_set_from_arrays(scores, overlaps, boxes)


def prune_matrix(box_set: ScoredBoxSet, spec: PruneSpec) -> np.ndarray:
    """Strictly lower-triangular P = p(lower(O))."""
    return np.tril(np.asarray(prune(spec, box_set.O)), k=-1)


def group_boxes(box_set: ScoredBoxSet, nt: float = DEFAULT_NT, alpha: int = DEFAULT_ALPHA) -> Grouping:
    """
    Greedy grouping of sorted boxes.

    The highest remaining box gathers every remaining box with overlap above
    ``nt`` (itself included); the first ``alpha`` form a group and the rest
    go to ``suppressed_overflow``. The loop continues on the low-overlap
    remainder.
    """
    if alpha < 1:
        raise InputError("alpha must be at least 1")
    remaining = np.arange(box_set.n)
    groups: List[List[int]] = []
    overflow: List[int] = []
    while remaining.size:
        top = remaining[0]
        column = box_set.O[remaining, top]
        members = remaining[column > nt]
        groups.append([int(i) for i in members[:alpha]])
        overflow.extend(int(i) for i in members[alpha:])
        remaining = remaining[column <= nt]
    logger.debug(f"grouped {box_set.n} boxes into {len(groups)} groups, {len(overflow)} overflow")
    return Grouping(groups=groups, alpha=alpha, suppressed_overflow=overflow)


def rescore_arrays(s: np.ndarray, O: np.ndarray, grouping: Grouping, spec: PruneSpec) -> np.ndarray:  # noqa: E741
    """
    Masked group rescore on raw arrays (sorted order).

    Group tops keep their score, members get clip(s_i - p(o_i,top) s_top),
    overflow boxes get 0.
    """
    r = np.zeros_like(np.asarray(s, dtype=float))
    for group in grouping.groups:
        top, members = group[0], group[1:]
        r[top] = np.clip(s[top], 0.0, 1.0)
        if members:
            p = prune(spec, O[members, top])
            r[members] = np.clip(s[members] - p * s[top], 0.0, 1.0)
    return r


def select_valid(r: Sequence[float], v: float = DEFAULT_V, perm: Optional[Iterable[int]] = None) -> List[int]:
    """
    Indices whose rescore reaches ``v``.

    Args:
        r: Rescores in sorted order
        v: Validity threshold
        perm: Sorted-to-original permutation; identity when omitted

    Returns:
        Original indices in ascending order
    """
    r = np.asarray(r, dtype=float).reshape(-1)
    keep = np.flatnonzero(r >= v)
    if perm is not None:
        keep = np.asarray(list(perm), dtype=int)[keep]
    return sorted(int(i) for i in keep)


def groomed_rescore(
    box_set: ScoredBoxSet,
    grouping: Grouping,
    spec: PruneSpec,
    v: float = DEFAULT_V,
    with_jacobians: bool = False,
) -> RescoreResult:
    """Group-wise rescoring r_Gk = clip((I - M o P) s_Gk), optionally with rescore_jacobians attached."""
    r = rescore_arrays(box_set.s, box_set.O, grouping, spec)
    result = RescoreResult(r=r, valid=select_valid(r, v, box_set.perm))
    if with_jacobians:
        result.jac_s, result.jac_O = rescore_jacobians(box_set, grouping, spec)
    return result


def groomed_rescore_full(
    box_set: ScoredBoxSet, spec: PruneSpec, v: float = DEFAULT_V, with_jacobians: bool = False
) -> RescoreResult:
    """
    Full matrix form r = clip((I + P)^-1 s).

    I + P is unit lower-triangular, so the system is solved by forward
    substitution and is always solvable. with_jacobians attaches
    rescore_full_jacobians to the result.
    """
    if box_set.n == 0:
        return RescoreResult(r=np.zeros(0))
    system = np.eye(box_set.n) + prune_matrix(box_set, spec)
    raw = solve_triangular(system, box_set.s, lower=True, unit_diagonal=True)
    r = np.clip(raw, 0.0, 1.0)
    result = RescoreResult(r=r, valid=select_valid(r, v, box_set.perm))
    if with_jacobians:
        result.jac_s, result.jac_O = rescore_full_jacobians(box_set, spec)
    return result


def reference_nms(box_set: ScoredBoxSet, spec: PruneSpec, v: float = DEFAULT_V) -> RescoreResult:
    """
    Greedy Classical/Soft-NMS.

    Repeatedly pop the remaining box with the highest rescore (ties to the
    earlier sorted position) and multiply every remaining rescore by
    1 - p(O[top, i]). Hard pruning gives classical NMS, linear and
    exponential pruning give Soft-NMS.
    """
    r = box_set.s.astype(float).copy()
    remaining = list(range(box_set.n))
    while remaining:
        top = remaining.pop(int(np.argmax(r[remaining])))
        if not remaining:
            break
        rest = np.asarray(remaining)
        r[rest] *= 1.0 - np.asarray(prune(spec, box_set.O[top, rest]))
    return RescoreResult(r=r, valid=select_valid(r, v, box_set.perm))


def groomed_nms(
    box_set: ScoredBoxSet,
    spec: PruneSpec,
    alpha: int = DEFAULT_ALPHA,
    v: float = DEFAULT_V,
) -> Tuple[Grouping, RescoreResult]:
    """Grouping, masked rescoring and thresholding in one call."""
    grouping = group_boxes(box_set, spec.nt, alpha)
    return grouping, groomed_rescore(box_set, grouping, spec, v)


def _clip_gate(x: np.ndarray) -> np.ndarray:
    return ((x > 0.0) & (x < 1.0)).astype(float)


def rescore_jacobians(
    box_set: ScoredBoxSet, grouping: Grouping, spec: PruneSpec
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Analytic Jacobians of the masked rescore.

    Returns:
        jac_s: n x n, entry [i, j] = dr_i/ds_j
        jac_O: n x n, entry [i, top(i)] = dr_i/dO[i, top(i)] (the lower
            triangular overlap actually read); all other entries are 0

    Raises:
        NonDifferentiableError: for hard pruning
    """
    if spec.kind == PruneKind.HARD:
        raise NonDifferentiableError("rescore Jacobians need a differentiable pruning function")
    n = box_set.n
    s, O = box_set.s, box_set.O  # noqa: E741
    jac_s = np.zeros((n, n))
    jac_O = np.zeros((n, n))
    for group in grouping.groups:
        top, members = group[0], np.asarray(group[1:], dtype=int)
        jac_s[top, top] = _clip_gate(np.asarray(s[top]))
        if members.size == 0:
            continue
        o = O[members, top]
        p = np.asarray(prune(spec, o))
        gate = _clip_gate(s[members] - p * s[top])
        jac_s[members, members] = gate
        jac_s[members, top] = -p * gate
        jac_O[members, top] = -np.asarray(prune_derivative(spec, o)) * s[top] * gate
    return jac_s, jac_O


def rescore_full_jacobians(box_set: ScoredBoxSet, spec: PruneSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Analytic Jacobians of the full matrix form.

    With M = I + P and r~ = M^-1 s: dr~/ds = M^-1 and
    dr~/dO_ij = -M^-1 e_i p'(O_ij) r~_j for i > j, gated by the clip.

    Returns:
        jac_s: n x n
        jac_O: n x n x n, entry [k, i, j] = dr_k/dO_ij (zero unless i > j)
    """
    if spec.kind == PruneKind.HARD:
        raise NonDifferentiableError("rescore Jacobians need a differentiable pruning function")
    n = box_set.n
    system = np.eye(n) + prune_matrix(box_set, spec)
    inverse = solve_triangular(system, np.eye(n), lower=True, unit_diagonal=True)
    raw = inverse @ box_set.s
    gate = _clip_gate(raw)
    jac_s = gate[:, None] * inverse
    dp = np.tril(np.asarray(prune_derivative(spec, box_set.O)), k=-1)
    jac_O = -gate[:, None, None] * inverse[:, :, None] * (dp * raw[None, :])[None, :, :]
    return jac_s, jac_O
