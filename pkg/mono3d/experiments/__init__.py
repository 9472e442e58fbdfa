"""
Experiment runners, one package per CLI subcommand.

Each package exposes ``validate(config_data)`` and ``run(config_data)``;
``run`` never raises and returns the standard experiment response.
"""

__all__ = ["nms_compare", "convergence_sim", "depth_trend", "equivariance_check", "giou_table"]
