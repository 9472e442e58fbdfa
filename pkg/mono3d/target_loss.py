"""Target Loss

Best-box target assignment and the imagewise AP loss.

Quality of a box b against a ground truth g is
q(b, g) = IoU2D(b, g) * (1 + gIoU3D(b, g)) / 2. Per ground truth only the
argmax-quality box can become a positive, and only if q >= beta.

The imagewise AP loss ranks the post-NMS rescores of each image separately
and returns 1 - mean(AP) over images.
"""

from __future__ import annotations

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from .geometry import giou3d, iou2d
from .shared.errors import InputError
from .shared.schemas import Assignment, Box3D

logger = logging.getLogger("target-loss")

DEFAULT_BETA = 0.3


def quality(b: Box3D, g: Box3D) -> float:
    """IoU2D weighted by the gIoU3D mapped to [0, 1]."""
    overlap = iou2d(b.box2d, g.box2d)
    if overlap == 0.0:
        return 0.0
    return float(np.clip(overlap * (1.0 + giou3d(b, g)) / 2.0, 0.0, 1.0))


def assign_from_quality(q: np.ndarray, beta: float = DEFAULT_BETA) -> Assignment:
    """
    Argmax assignment on a boxes x gts quality matrix.

    A box claimed by several ground truths keeps the one with the highest
    quality, then the lowest gt index.
    """
    q = np.asarray(q, dtype=float)
    if q.ndim != 2:
        raise InputError("quality matrix must be boxes x gts")
    n_boxes, n_gts = q.shape
    labels = np.zeros(n_boxes, dtype=int)
    matched: List[Optional[int]] = [None] * n_boxes
    best_quality = q.max(axis=1) if n_gts else np.zeros(n_boxes)
    if n_boxes == 0:
        return Assignment(labels=labels, quality=best_quality, matched_gt=matched)

    for gt in range(n_gts):
        box = int(np.argmax(q[:, gt]))
        if q[box, gt] < beta:
            continue
        current = matched[box]
        if current is None or q[box, gt] > q[box, current]:
            matched[box] = gt
            labels[box] = 1
    return Assignment(labels=labels, quality=best_quality, matched_gt=matched)


def assign_targets(boxes: Sequence[Box3D], gts: Sequence[Box3D], beta: float = DEFAULT_BETA) -> Assignment:
    """
    Label the best box of every ground truth.

    Args:
        boxes: Detections of one image
        gts: Ground-truth boxes of the same image
        beta: Minimum quality of a positive, in (0, 1)

    Returns:
        Assignment with labels, best quality per box and matched gt index
    """
    if not 0.0 < beta < 1.0:
        raise InputError("beta must lie in (0, 1)")
    q = np.array([[quality(b, g) for g in gts] for b in boxes], dtype=float).reshape(len(boxes), len(gts))
    assignment = assign_from_quality(q, beta)
    logger.debug(f"assigned {int(assignment.labels.sum())} positives among {len(boxes)} boxes")
    return assignment


def _ranking(rescores: np.ndarray) -> np.ndarray:
    # descending rescore, ties keep box order
    return np.argsort(-rescores, kind="stable")


def image_ap(rescores: Sequence[float], labels: Sequence[int]) -> float:
    """
    Average precision of one image's ranking.

    Mean of precision@k over the ranks k of the positives; 1 when the image
    has no positives.
    """
    rescores = np.asarray(rescores, dtype=float).reshape(-1)
    labels = np.asarray(labels, dtype=int).reshape(-1)
    if rescores.shape != labels.shape:
        raise InputError("rescores and labels must have the same length")
    ranked = labels[_ranking(rescores)]
    positives = np.flatnonzero(ranked == 1)
    if positives.size == 0:
        return 1.0
    hits = np.cumsum(ranked)[positives]
    return float(np.mean(hits / (positives + 1)))


def imagewise_ap(
    rescores_per_image: Sequence[Sequence[float]], labels_per_image: Sequence[Sequence[int]]
) -> float:
    """Imagewise AP loss: 1 - mean over images of the per-image AP."""
    if len(rescores_per_image) != len(labels_per_image):
        raise InputError("need one label vector per image")
    if not rescores_per_image:
        return 0.0
    aps = [image_ap(r, y) for r, y in zip(rescores_per_image, labels_per_image)]
    return float(1.0 - np.mean(aps))


def imagewise_ap_table(
    rescores_per_image: Sequence[Sequence[float]], labels_per_image: Sequence[Sequence[int]]
) -> List[Dict[str, float]]:
    """Rows of box_id, rescore, label, rank (1-based), per-image AP and image index."""
    rows = []
    for image, (rescores, labels) in enumerate(zip(rescores_per_image, labels_per_image)):
        rescores = np.asarray(rescores, dtype=float)
        labels = np.asarray(labels, dtype=int)
        ap = image_ap(rescores, labels)
        ranks = np.empty(rescores.size, dtype=int)
        ranks[_ranking(rescores)] = np.arange(1, rescores.size + 1)
        for box_id in range(rescores.size):
            rows.append(
                {
                    "box_id": box_id,
                    "rescore": float(rescores[box_id]),
                    "label": int(labels[box_id]),
                    "rank": int(ranks[box_id]),
                    "per_image_ap": ap,
                    "image": image,
                }
            )
    return rows
