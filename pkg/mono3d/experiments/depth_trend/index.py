"""Depth Trend

Mean depth error of ground, regressed and merged estimators over a sweep
of camera-height changes.

Input fields:
- dh_min, dh_max, steps: height-change sweep (metres, inclusive)
- trials, noise_sigma, beta: simulation setup
- camera, scene: CameraModel and SyntheticScene overrides

Output fields:
- csv: one row per height change
- ground_slope, regressed_slope: least-squares slopes of the mean errors
"""

from __future__ import annotations

import logging
from typing import Any, Dict

import numpy as np
import pandas as pd
from scipy import stats

from ...depth_geometry import trend_sim
from ...shared.schemas import DepthTrendConfig
from ...shared.utils import (
    error_category,
    format_experiment_response,
    log_experiment_error,
    resolve_output_path,
    write_csv,
)

logger = logging.getLogger("depth-trend")

COLUMNS = [
    "dh",
    "mean_err_ground",
    "mean_err_regressed",
    "mean_err_merged",
    "se",
    "ground_residual",
    "mean_err_ground_exact",
]


def validate(config_data: Dict[str, Any]) -> DepthTrendConfig:
    """Validate experiment input."""
    if not isinstance(config_data, dict):
        raise ValueError("Input must be a dictionary")
    return DepthTrendConfig.model_validate(config_data)


def height_deltas(config: DepthTrendConfig) -> np.ndarray:
    """Evenly spaced height changes from dh_min to dh_max."""
    return np.linspace(config.dh_min, config.dh_max, config.steps)


def run(config_data: Dict[str, Any]) -> Dict[str, Any]:
    """Simulate depth-error trends under camera-height changes."""
    experiment_name = "depth-trend"
    try:
        config = validate(config_data)
        rows = trend_sim(
            config.camera,
            height_deltas(config),
            config.scene,
            beta=config.beta,
            noise_sigma=config.noise_sigma,
            trials=config.trials,
            seed=config.seed,
        )
        frame = pd.DataFrame([row.model_dump() for row in rows], columns=COLUMNS)
        csv_path = write_csv(frame, resolve_output_path(config.output_path, "depth_trend.csv"))

        output: Dict[str, Any] = {"csv": str(csv_path), "rows": len(frame)}
        if len(frame) > 1:
            output["ground_slope"] = float(stats.linregress(frame["dh"], frame["mean_err_ground"]).slope)
            output["regressed_slope"] = float(stats.linregress(frame["dh"], frame["mean_err_regressed"]).slope)
        logger.info(f"depth-trend: {len(frame)} height changes simulated")
        return format_experiment_response(experiment_name, output)
    except Exception as exc:
        log_experiment_error(experiment_name, exc)
        return format_experiment_response(
            experiment_name,
            {},
            status="error",
            errors=[f"DEPTH_TREND_FAIL: {exc}"],
            error_type=error_category(exc),
        )


if __name__ == "__main__":
    import json
    import sys

    params = json.loads(sys.argv[1]) if len(sys.argv) > 1 else {"command": "depth-trend", "steps": 5}
    print(json.dumps(run(params), indent=2))
