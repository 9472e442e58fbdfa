"""
Shared Utility Functions for mono3d-theory-kit

This module provides helpers used across all modules and experiments:
environment/logging setup, the standard experiment response format, error
logging, deterministic random generators and CSV/JSON I/O.
"""

import json
import logging
import os
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from .errors import InputError

# Load environment variables
load_dotenv()

# Configure logging
logging.basicConfig(
    level=os.getenv("LOG_LEVEL", "INFO"),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[logging.StreamHandler()],
)
logger = logging.getLogger("mono3d")

CSV_FLOAT_FORMAT = "%.9g"


def default_output_dir() -> Path:
    """Directory used for experiment outputs when no path is given."""
    return Path(os.getenv("MONO3D_OUTPUT_DIR", "results"))


def default_workers() -> int:
    """Worker count for Monte-Carlo experiments (MONO3D_WORKERS, default 1)."""
    try:
        return max(1, int(os.getenv("MONO3D_WORKERS", "1")))
    except ValueError:
        logger.warning("MONO3D_WORKERS is not an integer; using 1 worker")
        return 1


# Random number generation
def make_rng(seed: Optional[int]) -> np.random.Generator:
    """Create a PCG64 generator from an integer seed."""
    return np.random.default_rng(seed)


def spawn_seeds(seed: int, count: int) -> List[np.random.SeedSequence]:
    """
    Derive independent per-trial seed sequences.

    Trial i always receives the same child sequence for a given seed, so
    results do not depend on how trials are scheduled across workers.

    Args:
        seed: Root seed
        count: Number of child sequences

    Returns:
        List of SeedSequence objects, one per trial
    """
    return np.random.SeedSequence(seed).spawn(count)


# JSON / CSV I/O
def load_json_text(text: str, source: str = "<string>") -> Any:
    """
    Parse a JSON document, reporting the failure position.

    Raises:
        InputError: with line and column of the first syntax error
    """
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        logger.error(f"Invalid JSON in {source}: {e.msg} (line {e.lineno}, column {e.colno})")
        raise InputError(
            f"Invalid JSON in {source}: {e.msg} at line {e.lineno}, column {e.colno}"
        ) from e


def load_json_file(path: Union[str, Path]) -> Any:
    """Load and parse a JSON file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        logger.error(f"Input file not found: {path}")
        raise InputError(f"Input file not found: {path}")
    return load_json_text(text, source=str(path))


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """
    Write a table with a header row and 9 significant digits.

    Args:
        frame: Table to write; column order is preserved
        path: Destination file (parent directories are created)

    Returns:
        Path: The written file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path


def write_json(data: Dict[str, Any], path: Union[str, Path]) -> Path:
    """Write a JSON document with sorted keys."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


# Error handling and logging
def log_experiment_error(
    experiment: str, error: Exception, context: Optional[str] = None
) -> Dict[str, Any]:
    """
    Log an experiment error and format it for reporting.

    Args:
        experiment: Name of the experiment
        error: Exception that occurred
        context: Extra detail such as the input file

    Returns:
        Dict with error information
    """
    error_info = {
        "experiment": experiment,
        "error": str(error),
        "error_type": type(error).__name__,
        "timestamp": datetime.now().isoformat(),
    }

    if context:
        error_info["context"] = context

    logger.error(f"Experiment error: {experiment} - {error}")
    return error_info


def format_experiment_response(
    experiment: str,
    output: Dict[str, Any],
    status: str = "done",
    errors: Optional[List[str]] = None,
    error_type: Optional[str] = None,
) -> Dict[str, Any]:
    """
    Format an experiment response according to the standard schema.

    Args:
        experiment: Name of the experiment
        output: Output data from the experiment
        status: "done" or "error"
        errors: List of error messages
        error_type: Exception class name when status is "error"

    Returns:
        Dict with formatted response
    """
    response = {
        "experiment": experiment,
        "output": output,
        "status": status,
        "errors": errors or [],
        "updated_at": datetime.now().isoformat(),
    }
    if error_type:
        response["error_type"] = error_type
    return response


def to_builtin(value: Any) -> Any:
    """Convert numpy scalars/arrays nested in dicts and lists to plain Python."""
    if isinstance(value, dict):
        return {k: to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


def error_category(error: Exception) -> str:
    """'input' for bad configs, files and values; 'numerical' for everything else."""
    if isinstance(error, (ValueError, TypeError, OSError)):
        return "input"
    return "numerical"


def resolve_output_path(output_path: Optional[str], default_name: str) -> Path:
    """The configured output path, or ``default_name`` under MONO3D_OUTPUT_DIR."""
    if output_path:
        return Path(output_path)
    return default_output_dir() / default_name
