"""NMS Compare

Rescores one image's detections with classical NMS, Soft-NMS and the
grouped matrix NMS, and writes one CSV row per box in input order. The
kept column marks the grouped method's valid boxes.

Input fields:
- boxes: JSON box file (or inline JSON array); random boxes when omitted
- gts: optional ground-truth box file; adds the per-image AP table
- nt, prune, tau, v, alpha, beta, n_boxes, seed, output_path

Output fields:
- csv: path of the rescore table
- kept: number of valid boxes per method
- ap_csv, ap_loss: present when ground truths are given
"""

from __future__ import annotations

import logging
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from ...geometry import load_boxes, random_box_set
from ...nms import build_box_set, groomed_nms, groomed_rescore_full, reference_nms
from ...shared.schemas import Box3D, NmsCompareConfig, PruneKind, PruneSpec
from ...shared.utils import (
    error_category,
    format_experiment_response,
    log_experiment_error,
    resolve_output_path,
    write_csv,
)
from ...target_loss import assign_targets, imagewise_ap, imagewise_ap_table

logger = logging.getLogger("nms-compare")

COLUMNS = [
    "box_id",
    "score",
    "rescore_classical",
    "rescore_soft",
    "rescore_groomed",
    "kept",
    "rank",
    "group",
    "rescore_groomed_full",
    "kept_classical",
    "kept_soft",
]


def validate(config_data: Dict[str, Any]) -> NmsCompareConfig:
    """Validate experiment input."""
    if not isinstance(config_data, dict):
        raise ValueError("Input must be a dictionary")
    return NmsCompareConfig.model_validate(config_data)


def _in_input_order(values: np.ndarray, perm: np.ndarray) -> np.ndarray:
    out = np.empty_like(values)
    out[perm] = values
    return out


def compare_rescores(boxes: List[Box3D], config: NmsCompareConfig) -> pd.DataFrame:
    """Per-box rescores of every method, rows in input order."""
    box_set = build_box_set(boxes)
    perm = box_set.perm
    spec = PruneSpec(kind=config.prune, nt=config.nt, tau=config.tau)
    classical = reference_nms(box_set, PruneSpec(kind=PruneKind.HARD, nt=config.nt), config.v)
    soft = reference_nms(box_set, spec, config.v)
    grouping, groomed = groomed_nms(box_set, spec, config.alpha, config.v)
    full = groomed_rescore_full(box_set, spec, config.v)

    group_of = np.full(box_set.n, -1, dtype=int)
    for index, group in enumerate(grouping.groups):
        group_of[group] = index
    ranks = np.arange(1, box_set.n + 1)

    frame = pd.DataFrame(
        {
            "box_id": np.arange(box_set.n),
            "score": _in_input_order(box_set.s, perm),
            "rank": _in_input_order(ranks, perm),
            "group": _in_input_order(group_of, perm),
            "rescore_classical": _in_input_order(classical.r, perm),
            "rescore_soft": _in_input_order(soft.r, perm),
            "rescore_groomed": _in_input_order(groomed.r, perm),
            "kept": np.isin(np.arange(box_set.n), groomed.valid).astype(int),
            "rescore_groomed_full": _in_input_order(full.r, perm),
            "kept_classical": np.isin(np.arange(box_set.n), classical.valid).astype(int),
            "kept_soft": np.isin(np.arange(box_set.n), soft.valid).astype(int),
        }
    )
    return frame[COLUMNS]


def run(config_data: Dict[str, Any]) -> Dict[str, Any]:
    """Compare NMS variants on one image of detections."""
    experiment_name = "nms-compare"
    try:
        config = validate(config_data)
        boxes = load_boxes(config.boxes) if config.boxes else random_box_set(config.n_boxes, config.seed)
        if not boxes:
            raise ValueError("box set is empty")
        frame = compare_rescores(boxes, config)
        csv_path = write_csv(frame, resolve_output_path(config.output_path, "nms_compare.csv"))
        output: Dict[str, Any] = {
            "csv": str(csv_path),
            "n_boxes": len(boxes),
            "kept": {
                "classical": int(frame["kept_classical"].sum()),
                "soft": int(frame["kept_soft"].sum()),
                "groomed": int(frame["kept"].sum()),
            },
        }

        if config.gts:
            gts = load_boxes(config.gts)
            labels = assign_targets(boxes, gts, config.beta).labels
            rescores = frame["rescore_groomed"].to_numpy()
            table = pd.DataFrame(imagewise_ap_table([rescores], [labels]))
            ap_path = write_csv(table, csv_path.with_name(f"{csv_path.stem}_ap.csv"))
            output["ap_csv"] = str(ap_path)
            output["ap_loss"] = imagewise_ap([rescores], [labels])

        logger.info(f"nms-compare: {output['kept']} of {len(boxes)} boxes kept")
        return format_experiment_response(experiment_name, output)
    except Exception as exc:
        log_experiment_error(experiment_name, exc)
        return format_experiment_response(
            experiment_name,
            {},
            status="error",
            errors=[f"NMS_COMPARE_FAIL: {exc}"],
            error_type=error_category(exc),
        )


if __name__ == "__main__":
    import json
    import sys

    params = json.loads(sys.argv[1]) if len(sys.argv) > 1 else {"command": "nms-compare", "n_boxes": 12}
    print(json.dumps(run(params), indent=2))
