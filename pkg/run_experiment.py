#!/usr/bin/env python3
"""
Experiment Runner for mono3d-theory-kit

Runs one experiment subcommand, writes its CSV and prints a JSON summary.
Parameters come from an optional --config JSON file; explicit flags win.

Usage:
    python run_experiment.py nms-compare --boxes demo.json --nt 0.4 --prune linear
    python run_experiment.py convergence-sim --sigma 1.0 --ell 4 --trials 10000 --seed 7
    python run_experiment.py depth-trend --config mono3d/experiments/depth_trend/test_input.json
    python run_experiment.py --help

Exit codes: 0 ok, 1 usage, 2 input error, 3 numerical failure.
"""

import argparse
import importlib
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

from mono3d.shared.errors import InputError
from mono3d.shared.schemas import ExperimentCommand, PruneKind
from mono3d.shared.utils import default_workers, load_json_file, to_builtin

logger = logging.getLogger("experiment-runner")

# ANSI colors for terminal output
GREEN = "\033[92m"
RED = "\033[91m"
YELLOW = "\033[93m"
BLUE = "\033[94m"
ENDC = "\033[0m"
BOLD = "\033[1m"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

# argparse destinations that are not experiment parameters
RUNNER_KEYS = {"command", "config", "output", "summary_file", "verbose"}


class UsageError(Exception):
    """Bad command line."""


class ExperimentArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors instead of exiting with status 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def build_parser() -> argparse.ArgumentParser:
    """Parser with one subcommand per experiment."""
    parser = ExperimentArgumentParser(description="Run a mono3d experiment and write its CSV output")
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable verbose logging")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add_command(command: ExperimentCommand, help_text: str) -> argparse.ArgumentParser:
        sub = subparsers.add_parser(command.value, help=help_text)
        sub.add_argument("--config", help="JSON file with experiment parameters")
        sub.add_argument("--output", help="CSV output path (default: $MONO3D_OUTPUT_DIR/<command>.csv)")
        sub.add_argument("--summary-file", help="Write the JSON summary to this path")
        sub.add_argument("--seed", type=int, help="Random seed")
        return sub

    nms = add_command(ExperimentCommand.NMS_COMPARE, "Classical vs Soft vs grouped NMS rescores")
    nms.add_argument("--boxes", help="JSON box file (random boxes when omitted)")
    nms.add_argument("--gts", help="JSON ground-truth box file; adds the per-image AP table")
    nms.add_argument("--n-boxes", dest="n_boxes", type=int, help="Number of random boxes")
    nms.add_argument("--nt", type=float, help="Overlap threshold Nt")
    nms.add_argument("--prune", choices=[kind.value for kind in PruneKind], help="Pruning function")
    nms.add_argument("--tau", type=float, help="Pruning temperature")
    nms.add_argument("--v", type=float, help="Validity threshold on rescores")
    nms.add_argument("--alpha", type=int, help="Maximum group size")
    nms.add_argument("--beta", type=float, help="Minimum quality of a positive")

    conv = add_command(ExperimentCommand.CONVERGENCE_SIM, "Gradient variance and SGD deviation per loss")
    conv.add_argument("--sigma", type=float, help="Noise standard deviation (m)")
    conv.add_argument("--ell", type=float, help="Object length (m)")
    conv.add_argument("--trials", type=int, help="Monte-Carlo SGD trials")
    conv.add_argument("--steps", type=int, help="SGD steps per trial")
    conv.add_argument("--dim", type=int, help="Weight dimension")
    conv.add_argument("--mc-samples", dest="mc_samples", type=int, help="Noise draws for the sampled variance")
    conv.add_argument("--workers", type=int, help="Worker processes (default: $MONO3D_WORKERS)")

    depth = add_command(ExperimentCommand.DEPTH_TREND, "Depth-error trends under camera-height changes")
    depth.add_argument("--dh-min", dest="dh_min", type=float, help="Smallest height change (m)")
    depth.add_argument("--dh-max", dest="dh_max", type=float, help="Largest height change (m)")
    depth.add_argument("--steps", type=int, help="Number of height changes")
    depth.add_argument("--trials", type=int, help="Monte-Carlo trials")
    depth.add_argument("--noise-sigma", dest="noise_sigma", type=float, help="Depth noise (m)")
    depth.add_argument("--beta", type=float, help="Regression slope (m per pixel)")

    equiv = add_command(ExperimentCommand.EQUIVARIANCE_CHECK, "Scale-equivariance error of SES vs vanilla")
    equiv.add_argument("--scales", type=_float_list, help="Comma-separated rescaling factors")
    equiv.add_argument("--bank-scales", dest="bank_scales", type=_float_list, help="Filter bank scales")
    equiv.add_argument("--size", type=int, help="Odd filter size")
    equiv.add_argument("--base-sigma", dest="base_sigma", type=float, help="Filter sigma at scale 1")
    equiv.add_argument("--max-order", dest="max_order", type=int, help="Highest Hermite order")
    equiv.add_argument("--n-images", dest="n_images", type=int, help="Number of toy images")
    equiv.add_argument("--image-size", dest="image_size", type=int, help="Toy image side length")
    equiv.add_argument("--images", nargs="+", help="Image files to use instead of toy images")

    giou = add_command(ExperimentCommand.GIOU_TABLE, "IoU3D / gIoU3D sweep over offsets and yaws")
    giou.add_argument("--offsets", type=_float_list, help="Comma-separated centre offsets (m)")
    giou.add_argument("--yaws", type=_float_list, help="Comma-separated yaw differences (rad)")
    giou.add_argument("--length", dest="l", type=float, help="Box length (m)")
    giou.add_argument("--width", dest="w", type=float, help="Box width (m)")
    giou.add_argument("--height", dest="h", type=float, help="Box height (m)")
    giou.add_argument("--resolution", type=int, help="Voxel oracle cells per metre")
    return parser


def build_config(args: argparse.Namespace) -> Dict[str, Any]:
    """
    Merge the --config file with explicit flags.

    Raises:
        InputError: if the file is unreadable, not a JSON object, or names
            another command
    """
    config: Dict[str, Any] = {}
    if args.config:
        loaded = load_json_file(args.config)
        if not isinstance(loaded, dict):
            raise InputError(f"{args.config}: expected a JSON object")
        config.update(loaded)
    if config.get("command", args.command) != args.command:
        raise InputError(f"{args.config} configures '{config['command']}', not '{args.command}'")
    config["command"] = args.command

    for key, value in vars(args).items():
        if key not in RUNNER_KEYS and value is not None:
            config[key] = value
    if args.output:
        config["output_path"] = args.output
    if args.command == ExperimentCommand.CONVERGENCE_SIM.value:
        config.setdefault("workers", default_workers())
    return config


def load_experiment(command: str):
    """Import the experiment package for a subcommand."""
    return importlib.import_module(f"mono3d.experiments.{command.replace('-', '_')}")


def run_experiment(command: str, config: Dict[str, Any]) -> Dict[str, Any]:
    """Run an experiment with the merged configuration."""
    module = load_experiment(command)
    logger.info(f"Running experiment: {command}")
    start_time = time.time()
    result = module.run(config)
    logger.info(f"Experiment completed in {time.time() - start_time:.2f} seconds")
    return result


def format_output(result: Dict[str, Any]) -> str:
    """Summary JSON with canonical key order."""
    return json.dumps(to_builtin(result), indent=2, sort_keys=True)


def exit_code(result: Dict[str, Any]) -> int:
    """Map an experiment response onto the process exit code."""
    if result.get("status") == "done":
        return EXIT_OK
    return EXIT_INPUT if result.get("error_type") == "input" else EXIT_NUMERICAL


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the script."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"{RED}Usage error: {e}{ENDC}", file=sys.stderr)
        return EXIT_USAGE

    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    try:
        config = build_config(args)
    except InputError as e:
        print(f"{RED}Input error: {e}{ENDC}", file=sys.stderr)
        return EXIT_INPUT

    result = run_experiment(args.command, config)
    code = exit_code(result)
    if code == EXIT_OK:
        print(f"{GREEN}{BOLD}{args.command} completed{ENDC}")
    else:
        print(f"{RED}{args.command} failed: {'; '.join(result.get('errors', []))}{ENDC}", file=sys.stderr)
    print(format_output(result))

    if args.summary_file:
        stable = {key: value for key, value in result.items() if key != "updated_at"}
        Path(args.summary_file).write_text(format_output(stable) + "\n", encoding="utf-8")
        print(f"{BLUE}Summary saved to {args.summary_file}{ENDC}")
    return code


if __name__ == "__main__":
    sys.exit(main())
