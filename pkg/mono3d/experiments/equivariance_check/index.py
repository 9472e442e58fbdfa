"""Equivariance Check

Scale-equivariance error of an SES layer against a single-scale layer on
toy or user-supplied images.

Input fields:
- scales: rescaling factors to test
- bank_scales, base_sigma, max_order, size: filter bank
- n_images, image_size: toy image set (ignored when images are given)
- images: optional image paths, loaded as grayscale

Output fields:
- csv: one row per scale
- mean_delta_ses, mean_delta_vanilla: averages over scales
- excluded: feature maps skipped for being all zero
"""

from __future__ import annotations

import logging
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from ...equivariance import (
    equivariance_error,
    load_image,
    make_filter_bank,
    scale_identity_error,
    scale_project,
    ses_convolve,
    toy_images,
    vanilla_convolve,
)
from ...shared.schemas import EquivarianceCheckConfig, Image2D
from ...shared.utils import (
    error_category,
    format_experiment_response,
    log_experiment_error,
    resolve_output_path,
    write_csv,
)

logger = logging.getLogger("equivariance-check")

COLUMNS = [
    "scale",
    "delta_ses",
    "delta_vanilla",
    "delta_ses_projected",
    "identity_error_ses",
    "identity_error_vanilla",
]


def validate(config_data: Dict[str, Any]) -> EquivarianceCheckConfig:
    """Validate experiment input."""
    if not isinstance(config_data, dict):
        raise ValueError("Input must be a dictionary")
    return EquivarianceCheckConfig.model_validate(config_data)


def load_images(config: EquivarianceCheckConfig) -> List[Image2D]:
    """User images when given, toy blob images otherwise."""
    if config.images:
        return [load_image(path) for path in config.images]
    return toy_images(config.n_images, config.image_size, config.seed)


def run(config_data: Dict[str, Any]) -> Dict[str, Any]:
    """Measure equivariance errors per scale."""
    experiment_name = "equivariance-check"
    try:
        config = validate(config_data)
        images = load_images(config)
        bank = make_filter_bank(config.bank_scales, config.base_sigma, config.max_order, config.size, config.seed)

        ses = equivariance_error(lambda image: ses_convolve(image, bank), images, config.scales)
        vanilla = equivariance_error(lambda image: vanilla_convolve(image, bank), images, config.scales)
        projected = equivariance_error(
            lambda image: scale_project(ses_convolve(image, bank)).grid, images, config.scales
        )

        rows = []
        for s in config.scales:
            identity = np.array([scale_identity_error(image, bank, s) for image in images])
            rows.append(
                {
                    "scale": s,
                    "delta_ses": ses.per_scale[float(s)],
                    "delta_vanilla": vanilla.per_scale[float(s)],
                    "delta_ses_projected": projected.per_scale[float(s)],
                    "identity_error_ses": float(identity[:, 0].mean()),
                    "identity_error_vanilla": float(identity[:, 1].mean()),
                }
            )
        frame = pd.DataFrame(rows, columns=COLUMNS)
        csv_path = write_csv(frame, resolve_output_path(config.output_path, "equivariance_check.csv"))

        output = {
            "csv": str(csv_path),
            "n_images": len(images),
            "mean_delta_ses": ses.mean,
            "mean_delta_vanilla": vanilla.mean,
            "excluded": ses.excluded + vanilla.excluded + projected.excluded,
        }
        logger.info(f"equivariance-check: delta ses={ses.mean:.3g} vanilla={vanilla.mean:.3g}")
        return format_experiment_response(experiment_name, output)
    except Exception as exc:
        log_experiment_error(experiment_name, exc)
        return format_experiment_response(
            experiment_name,
            {},
            status="error",
            errors=[f"EQUIVARIANCE_CHECK_FAIL: {exc}"],
            error_type=error_category(exc),
        )


if __name__ == "__main__":
    import json
    import sys

    params = json.loads(sys.argv[1]) if len(sys.argv) > 1 else {"command": "equivariance-check", "n_images": 4}
    print(json.dumps(run(params), indent=2))
