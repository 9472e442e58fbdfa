"""gIoU Table

IoU3D, gIoU3D and the voxel IoU of a box pair over a sweep of centre
offsets (along x) and yaw differences.

Input fields:
- offsets, yaws: sweep values (metres, radians)
- l, w, h: dimensions shared by both boxes
- resolution: voxel oracle cells per metre

Output fields:
- csv: one row per (offset, yaw)
- max_oracle_gap: largest |iou3d - voxel_iou3d|
"""

from __future__ import annotations

import logging
from typing import Any, Dict

import pandas as pd

from ...geometry import giou3d, iou3d, voxel_iou3d_oracle
from ...shared.schemas import Box3D, GiouTableConfig
from ...shared.utils import (
    error_category,
    format_experiment_response,
    log_experiment_error,
    resolve_output_path,
    write_csv,
)

logger = logging.getLogger("giou-table")

COLUMNS = ["offset", "yaw", "iou3d", "giou3d", "voxel_iou3d"]


def validate(config_data: Dict[str, Any]) -> GiouTableConfig:
    """Validate experiment input."""
    if not isinstance(config_data, dict):
        raise ValueError("Input must be a dictionary")
    return GiouTableConfig.model_validate(config_data)


def sweep(config: GiouTableConfig) -> pd.DataFrame:
    """Rows ordered by offset, then yaw."""
    anchor = Box3D(cx=0.0, cy=0.0, cz=0.0, l=config.l, w=config.w, h=config.h)
    rows = []
    for offset in config.offsets:
        for yaw in config.yaws:
            other = anchor.model_copy(update={"cx": offset, "yaw": yaw})
            rows.append(
                {
                    "offset": offset,
                    "yaw": yaw,
                    "iou3d": iou3d(anchor, other),
                    "giou3d": giou3d(anchor, other),
                    "voxel_iou3d": voxel_iou3d_oracle(anchor, other, config.resolution),
                }
            )
    return pd.DataFrame(rows, columns=COLUMNS)


def run(config_data: Dict[str, Any]) -> Dict[str, Any]:
    """Tabulate 3D overlap measures."""
    experiment_name = "giou-table"
    try:
        config = validate(config_data)
        frame = sweep(config)
        csv_path = write_csv(frame, resolve_output_path(config.output_path, "giou_table.csv"))
        output = {
            "csv": str(csv_path),
            "rows": len(frame),
            "max_oracle_gap": float((frame["iou3d"] - frame["voxel_iou3d"]).abs().max()),
        }
        logger.info(f"giou-table: {len(frame)} rows, oracle gap {output['max_oracle_gap']:.3g}")
        return format_experiment_response(experiment_name, output)
    except Exception as exc:
        log_experiment_error(experiment_name, exc)
        return format_experiment_response(
            experiment_name,
            {},
            status="error",
            errors=[f"GIOU_TABLE_FAIL: {exc}"],
            error_type=error_category(exc),
        )


if __name__ == "__main__":
    import json
    import sys

    params = json.loads(sys.argv[1]) if len(sys.argv) > 1 else {"command": "giou-table"}
    print(json.dumps(run(params), indent=2))
