"""Geometry

Overlap measures between 2D image boxes and 7-DoF 3D boxes.

- iou2d / giou2d: axis-aligned image boxes
- iou_bev / iou3d: rotated bird's-eye-view footprint intersection (shapely
  polygon clipping) times the vertical interval overlap
- giou3d: IoU3D + V(union)/V(hull) - 1 with an axis-aligned hull
- voxel_iou3d_oracle: brute-force cell counting used to verify iou3d

Boxes are read from JSON documents of the form
``[{cx, cy, cz, l, w, h, yaw, score, box2d: [x1, y1, x2, y2]}, ...]``.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, List, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError
from shapely.geometry import Polygon

from .shared.errors import GeometryError, InputError
from .shared.schemas import Box2D, Box3D
from .shared.utils import load_json_file, load_json_text, make_rng

logger = logging.getLogger("geometry")


def iou2d(a: Box2D, b: Box2D) -> float:
    """Intersection over union of two axis-aligned boxes; 0 when both are degenerate."""
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def giou2d(a: Box2D, b: Box2D) -> float:
    """Generalized IoU of two image boxes."""
    hull = (max(a.x2, b.x2) - min(a.x1, b.x1)) * (max(a.y2, b.y2) - min(a.y1, b.y1))
    if hull <= 0.0:
        raise GeometryError("generalized IoU undefined for a zero-area hull")
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = a.area + b.area - inter
    iou = inter / union if union > 0.0 else 0.0
    return iou - (hull - union) / hull


def overlap_matrix(boxes: Sequence[Box2D]) -> np.ndarray:
    """
    Pairwise IoU2D matrix.

    The diagonal is fixed to 1 so that even a degenerate box overlaps itself.
    """
    coords = np.array([[b.x1, b.y1, b.x2, b.y2] for b in boxes], dtype=float).reshape(-1, 4)
    x1, y1, x2, y2 = coords.T
    areas = (x2 - x1) * (y2 - y1)
    iw = np.clip(np.minimum(x2[:, None], x2[None, :]) - np.maximum(x1[:, None], x1[None, :]), 0, None)
    ih = np.clip(np.minimum(y2[:, None], y2[None, :]) - np.maximum(y1[:, None], y1[None, :]), 0, None)
    inter = iw * ih
    union = areas[:, None] + areas[None, :] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        overlaps = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
    overlaps = np.clip((overlaps + overlaps.T) / 2.0, 0.0, 1.0)
    np.fill_diagonal(overlaps, 1.0)
    return overlaps


def bev_corners(box: Box3D) -> np.ndarray:
    """Footprint corners in the (x, z) plane, counter-clockwise, yaw applied."""
    dx = np.array([box.l, box.l, -box.l, -box.l]) / 2.0
    dz = np.array([box.w, -box.w, -box.w, box.w]) / 2.0
    c, s = np.cos(box.yaw), np.sin(box.yaw)
    x = box.cx + c * dx + s * dz
    z = box.cz - s * dx + c * dz
    return np.stack([x, z], axis=1)


def _footprint(box: Box3D) -> Polygon:
    return Polygon(bev_corners(box))


def _vertical_extent(box: Box3D) -> Tuple[float, float]:
    return box.cy - box.h / 2.0, box.cy + box.h / 2.0


def _vertical_overlap(a: Box3D, b: Box3D) -> float:
    a_lo, a_hi = _vertical_extent(a)
    b_lo, b_hi = _vertical_extent(b)
    return max(0.0, min(a_hi, b_hi) - max(a_lo, b_lo))


def _intersection_volume(a: Box3D, b: Box3D) -> float:
    dy = _vertical_overlap(a, b)
    if dy <= 0.0:
        return 0.0
    return _footprint(a).intersection(_footprint(b)).area * dy


def iou_bev(a: Box3D, b: Box3D) -> float:
    """IoU of the rotated footprints."""
    pa, pb = _footprint(a), _footprint(b)
    inter = pa.intersection(pb).area
    union = pa.area + pb.area - inter
    return inter / union if union > 0.0 else 0.0


def iou3d(a: Box3D, b: Box3D) -> float:
    """
    3D IoU of two yaw-rotated boxes.

    Args:
        a: First box
        b: Second box

    Returns:
        float: Volume IoU in [0, 1]; 0 for zero-volume input
    """
    inter = _intersection_volume(a, b)
    union = a.volume + b.volume - inter
    if union <= 0.0:
        return 0.0
    return float(min(max(inter / union, 0.0), 1.0))


def _level_extent(box: Box3D) -> Tuple[float, float, float, float]:
    """Footprint bounds with yaw removed: an l x w rectangle at the box centre."""
    return box.cx - box.l / 2.0, box.cx + box.l / 2.0, box.cz - box.w / 2.0, box.cz + box.w / 2.0


def hull_volume(a: Box3D, b: Box3D) -> float:
    """Axis-aligned BEV hull of both de-rotated footprints times the vertical hull extent."""
    a_x0, a_x1, a_z0, a_z1 = _level_extent(a)
    b_x0, b_x1, b_z0, b_z1 = _level_extent(b)
    area = (max(a_x1, b_x1) - min(a_x0, b_x0)) * (max(a_z1, b_z1) - min(a_z0, b_z0))
    a_lo, a_hi = _vertical_extent(a)
    b_lo, b_hi = _vertical_extent(b)
    return float(area * (max(a_hi, b_hi) - min(a_lo, b_lo)))


def giou3d(a: Box3D, b: Box3D) -> float:
    """
    Generalized 3D IoU: V(inter)/V(union) + V(union)/V(hull) - 1.

    The hull drops rotation: each footprint is taken as an l x w rectangle at
    its centre and the hull is the rectangle enclosing both, extruded over the
    vertical hull. It never counts as smaller than the union, so identical
    boxes score 1 at any yaw and gIoU3D <= IoU3D.

    Raises:
        GeometryError: if both boxes have zero volume
    """
    inter = _intersection_volume(a, b)
    union = a.volume + b.volume - inter
    if union <= 0.0:
        raise GeometryError("gIoU3D undefined for zero-volume boxes")
    v_hull = max(hull_volume(a, b), union)
    return float(inter / union + union / v_hull - 1.0)


def _inside_footprint(box: Box3D, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    c, s = np.cos(box.yaw), np.sin(box.yaw)
    dx, dz = x - box.cx, z - box.cz
    # inverse of the rotation used in bev_corners
    local_x = c * dx - s * dz
    local_z = s * dx + c * dz
    return (np.abs(local_x) <= box.l / 2.0) & (np.abs(local_z) <= box.w / 2.0)


def voxel_iou3d_oracle(a: Box3D, b: Box3D, resolution: int = 64) -> float:
    """
    Brute-force IoU3D by counting cell centres of a regular grid.

    The grid covers the bounding region of both boxes at ``resolution``
    cells per metre. Both boxes are vertical prisms, so the 3D count factors
    into a BEV count times a vertical count over the same product grid.

    Args:
        a: First box
        b: Second box
        resolution: Cells per metre (>= 16)

    Returns:
        float: Approximate IoU3D
    """
    if resolution < 16:
        raise InputError("voxel oracle resolution must be at least 16 cells per metre")

    corners = np.vstack([bev_corners(a), bev_corners(b)])
    step = 1.0 / resolution

    def centres(lo: float, hi: float) -> np.ndarray:
        count = max(int(np.ceil((hi - lo) * resolution - 1e-9)), 1)
        return lo + (np.arange(count) + 0.5) * step

    xs = centres(corners[:, 0].min(), corners[:, 0].max())
    zs = centres(corners[:, 1].min(), corners[:, 1].max())
    a_lo, a_hi = _vertical_extent(a)
    b_lo, b_hi = _vertical_extent(b)
    ys = centres(min(a_lo, b_lo), max(a_hi, b_hi))

    gx, gz = np.meshgrid(xs, zs, indexing="ij")
    in_a = _inside_footprint(a, gx, gz)
    in_b = _inside_footprint(b, gx, gz)
    ya = (ys >= a_lo) & (ys <= a_hi)
    yb = (ys >= b_lo) & (ys <= b_hi)

    inter = np.count_nonzero(in_a & in_b) * np.count_nonzero(ya & yb)
    count_a = np.count_nonzero(in_a) * np.count_nonzero(ya)
    count_b = np.count_nonzero(in_b) * np.count_nonzero(yb)
    union = count_a + count_b - inter
    logger.debug(f"voxel oracle grid {len(xs)}x{len(ys)}x{len(zs)}: inter={inter} union={union}")
    if union == 0:
        return 0.0
    return inter / union


def parse_boxes(records: Any, source: str = "<boxes>") -> List[Box3D]:
    """Validate a decoded JSON array of box records."""
    if not isinstance(records, list):
        raise InputError(f"{source}: expected a JSON array of box records")
    boxes = []
    for index, record in enumerate(records):
        try:
            boxes.append(Box3D.model_validate(record))
        except ValidationError as e:
            raise InputError(f"{source}: invalid box at index {index}: {e}") from e
    return boxes


def load_boxes(source: Union[str, Path]) -> List[Box3D]:
    """
    Load boxes from a JSON file path or a JSON string.

    Raises:
        InputError: on unreadable files, malformed JSON (with line/column)
            or invalid records
    """
    text = str(source)
    if text.lstrip().startswith("["):
        return parse_boxes(load_json_text(text), "<string>")
    return parse_boxes(load_json_file(source), text)


def dump_boxes(boxes: Sequence[Box3D]) -> List[dict]:
    """Serialize boxes to the JSON record layout."""
    records = []
    for box in boxes:
        record = box.model_dump(exclude={"box2d"})
        record["box2d"] = [box.box2d.x1, box.box2d.y1, box.box2d.x2, box.box2d.y2]
        records.append(record)
    return records


def random_box_set(n: int, seed: int, image_size: float = 200.0) -> List[Box3D]:
    """
    Random detections of one image with clustered 2D boxes.

    Boxes are drawn around a few object centres so that overlaps above
    typical NMS thresholds are common.
    """
    rng = make_rng(seed)
    n_objects = max(1, n // 5)
    objects = rng.uniform(0.2 * image_size, 0.8 * image_size, size=(n_objects, 2))
    boxes = []
    for _ in range(n):
        centre = objects[rng.integers(n_objects)] + rng.normal(0.0, 8.0, size=2)
        half = rng.uniform(10.0, 40.0, size=2)
        box2d = Box2D(
            x1=float(centre[0] - half[0]),
            y1=float(centre[1] - half[1]),
            x2=float(centre[0] + half[0]),
            y2=float(centre[1] + half[1]),
        )
        dims = rng.uniform(0.5, 5.0, size=3)
        boxes.append(
            Box3D(
                cx=float(rng.uniform(-10, 10)),
                cy=float(rng.uniform(0.5, 2.0)),
                cz=float(rng.uniform(5, 50)),
                l=float(dims[0]),
                w=float(dims[1]),
                h=float(dims[2]),
                yaw=float(rng.uniform(-np.pi, np.pi)),
                score=float(rng.uniform(0.05, 1.0)),
                box2d=box2d,
            )
        )
    return boxes


def random_box_pairs(n: int, seed: int) -> List[Tuple[Box3D, Box3D]]:
    """Random pairs of nearby boxes with dimensions in [0.5, 5] m and arbitrary yaw."""
    rng = make_rng(seed)
    pairs = []
    for _ in range(n):
        dims = rng.uniform(0.5, 5.0, size=(2, 3))
        reach = (dims[0] + dims[1]) / 2.0
        offset = rng.uniform(-1.0, 1.0, size=3) * reach
        a = Box3D(
            cx=0.0,
            cy=0.0,
            cz=0.0,
            l=float(dims[0, 0]),
            w=float(dims[0, 1]),
            h=float(dims[0, 2]),
            yaw=float(rng.uniform(-np.pi, np.pi)),
        )
        b = Box3D(
            cx=float(offset[0]),
            cy=float(offset[2] * 0.5),
            cz=float(offset[1]),
            l=float(dims[1, 0]),
            w=float(dims[1, 1]),
            h=float(dims[1, 2]),
            yaw=float(rng.uniform(-np.pi, np.pi)),
        )
        pairs.append((a, b))
    return pairs
