"""Convergence Sim

Gradient variance and Monte-Carlo SGD weight deviation for the L1, L2 and
dice losses at one noise level and object length.

Input fields:
- sigma, ell: noise standard deviation and object length (metres)
- trials, steps, dim: SGD simulation size
- mc_samples: noise draws for the sampled variance
- workers, seed, output_path

Output fields:
- csv: one row per loss
- best_loss: loss with the smallest simulated deviation
- critical_sigma: noise level above which dice wins
- fit: (c1, c2, r2) of deviation against variance, null when undefined
"""

from __future__ import annotations

import logging
import math
from typing import Any, Dict

import numpy as np
import pandas as pd

from ...loss_analysis import (
    critical_sigma,
    fit_deviation_law,
    sgd_convergence_sim,
    theoretical_deviation,
    var_closed_form,
    var_monte_carlo,
)
from ...shared.schemas import ConvergenceSimConfig, LossKind, NoiseLossSpec, SgdSimConfig
from ...shared.utils import (
    error_category,
    format_experiment_response,
    log_experiment_error,
    resolve_output_path,
    write_csv,
)

logger = logging.getLogger("convergence-sim")

COLUMNS = [
    "kind",
    "sigma",
    "ell",
    "var_closed",
    "var_mc",
    "var_mc_se",
    "sim_deviation",
    "theory_deviation",
    "sim_deviation_se",
]


def validate(config_data: Dict[str, Any]) -> ConvergenceSimConfig:
    """Validate experiment input."""
    if not isinstance(config_data, dict):
        raise ValueError("Input must be a dictionary")
    return ConvergenceSimConfig.model_validate(config_data)


def simulate_losses(config: ConvergenceSimConfig) -> pd.DataFrame:
    """One row per loss kind; every kind sees the same random draws."""
    sim = SgdSimConfig(
        dim=config.dim,
        steps=config.steps,
        trials=config.trials,
        seed=config.seed,
        workers=config.workers,
    )
    rows = []
    for kind in LossKind:
        spec = NoiseLossSpec(kind=kind, sigma=config.sigma, ell=config.ell)
        variance = var_closed_form(spec)
        var_mc, var_se = var_monte_carlo(spec, config.mc_samples, config.seed)
        deviation, deviations = sgd_convergence_sim(spec, sim)
        spread = float(np.std(deviations, ddof=1) / math.sqrt(len(deviations))) if len(deviations) > 1 else 0.0
        rows.append(
            {
                "kind": kind.value,
                "sigma": config.sigma,
                "ell": config.ell,
                "var_closed": variance,
                "var_mc": var_mc,
                "var_mc_se": var_se,
                "theory_deviation": theoretical_deviation(sim, variance),
                "sim_deviation": deviation,
                "sim_deviation_se": spread,
            }
        )
    return pd.DataFrame(rows, columns=COLUMNS)


def run(config_data: Dict[str, Any]) -> Dict[str, Any]:
    """Run the loss convergence comparison."""
    experiment_name = "convergence-sim"
    try:
        config = validate(config_data)
        frame = simulate_losses(config)
        csv_path = write_csv(frame, resolve_output_path(config.output_path, "convergence_sim.csv"))

        variances = frame["var_closed"].to_numpy()
        fit = None
        if np.ptp(variances) > 0.0:
            c1, c2, r2 = fit_deviation_law(variances, frame["sim_deviation"].to_numpy())
            fit = {"c1": c1, "c2": c2, "r2": r2}
        output = {
            "csv": str(csv_path),
            "best_loss": str(frame.loc[frame["sim_deviation"].idxmin(), "kind"]),
            "critical_sigma": critical_sigma(config.ell),
            "fit": fit,
        }
        logger.info(f"convergence-sim: best loss {output['best_loss']} at sigma={config.sigma}")
        return format_experiment_response(experiment_name, output)
    except Exception as exc:
        log_experiment_error(experiment_name, exc)
        return format_experiment_response(
            experiment_name,
            {},
            status="error",
            errors=[f"CONVERGENCE_SIM_FAIL: {exc}"],
            error_type=error_category(exc),
        )


if __name__ == "__main__":
    import json
    import sys

    params = json.loads(sys.argv[1]) if len(sys.argv) > 1 else {"command": "convergence-sim", "trials": 200}
    print(json.dumps(run(params), indent=2))
