#!/usr/bin/env python3
"""Unit tests for shared helpers and schemas."""

import json
import os
import sys
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pandas as pd

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from mono3d.shared.errors import HorizonError, InputError, NumericalError  # noqa: E402
from mono3d.shared.schemas import (  # noqa: E402
    Box2D,
    CameraModel,
    GiouTableConfig,
    ScoredBoxSet,
)
from mono3d.shared.utils import (  # noqa: E402
    default_workers,
    error_category,
    format_experiment_response,
    load_json_file,
    load_json_text,
    resolve_output_path,
    spawn_seeds,
    to_builtin,
    write_csv,
)


class TestJsonInput(unittest.TestCase):
    """Tests for JSON loading."""

    def test_valid_document(self):
        self.assertEqual(load_json_text('{"nt": 0.4}'), {"nt": 0.4})

    def test_error_position(self):
        with self.assertRaises(InputError) as ctx:
            load_json_text('{\n  "nt": 0.4,\n  "prune": \n}', source="config.json")
        message = str(ctx.exception)
        self.assertIn("config.json", message)
        self.assertIn("line 4", message)
        self.assertIn("column 1", message)

    def test_missing_file(self):
        with self.assertRaises(InputError):
            load_json_file("/nonexistent/config.json")

    def test_file_round_trip(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "config.json"
            path.write_text(json.dumps({"seed": 3}), encoding="utf-8")
            self.assertEqual(load_json_file(path), {"seed": 3})


class TestOutput(unittest.TestCase):
    """Tests for CSV output and experiment responses."""

    def test_csv_format(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_csv(pd.DataFrame({"a": [1.0 / 3.0], "b": [2]}), Path(tmp) / "nested" / "out.csv")
            self.assertEqual(path.read_text(encoding="utf-8"), "a,b\n0.333333333,2\n")

    def test_response_format(self):
        response = format_experiment_response("giou-table", {"csv": "x.csv"})
        self.assertEqual(response["status"], "done")
        self.assertEqual(response["errors"], [])
        self.assertNotIn("error_type", response)
        self.assertIn("updated_at", response)

    def test_error_response(self):
        response = format_experiment_response("giou-table", {}, status="error", errors=["X"], error_type="input")
        self.assertEqual(response["error_type"], "input")

    def test_to_builtin(self):
        value = to_builtin({"a": np.float64(1.5), "b": (np.int64(2), np.array([1.0, 2.0]))})
        self.assertEqual(value, {"a": 1.5, "b": [2, [1.0, 2.0]]})
        self.assertIsInstance(value["a"], float)

    def test_error_category(self):
        self.assertEqual(error_category(InputError("bad")), "input")
        self.assertEqual(error_category(FileNotFoundError("gone")), "input")
        self.assertEqual(error_category(NumericalError("nan")), "numerical")
        self.assertEqual(error_category(HorizonError("up")), "numerical")

    def test_resolve_output_path(self):
        self.assertEqual(resolve_output_path("out/x.csv", "y.csv"), Path("out/x.csv"))
        with patch.dict(os.environ, {"MONO3D_OUTPUT_DIR": "/tmp/results"}):
            self.assertEqual(resolve_output_path(None, "y.csv"), Path("/tmp/results/y.csv"))


class TestEnvironment(unittest.TestCase):
    """Tests for environment-driven settings and seeding."""

    def test_workers_from_environment(self):
        with patch.dict(os.environ, {"MONO3D_WORKERS": "4"}):
            self.assertEqual(default_workers(), 4)
        with patch.dict(os.environ, {"MONO3D_WORKERS": "many"}):
            self.assertEqual(default_workers(), 1)

    def test_spawned_seeds_are_stable(self):
        first = [np.random.default_rng(s).random() for s in spawn_seeds(7, 3)]
        second = [np.random.default_rng(s).random() for s in spawn_seeds(7, 3)]
        self.assertEqual(first, second)
        self.assertEqual(len(set(first)), 3)


class TestSchemas(unittest.TestCase):
    """Validation rules of the shared models."""

    def test_box2d_from_list(self):
        self.assertEqual(Box2D.from_list([1, 2, 3, 4]).y2, 4.0)

    def test_unsorted_scores_rejected(self):
        with self.assertRaises(ValueError):
            ScoredBoxSet(s=np.array([0.2, 0.9]), O=np.eye(2), perm=np.array([0, 1]))

    def test_asymmetric_overlaps_rejected(self):
        with self.assertRaises(ValueError):
            ScoredBoxSet(s=np.array([0.9, 0.2]), O=np.array([[1.0, 0.5], [0.1, 1.0]]), perm=np.array([0, 1]))

    def test_camera_rotation_checked(self):
        with self.assertRaises(ValueError):
            CameraModel(R=((1.0, 0.0, 0.0), (0.0, 2.0, 0.0), (0.0, 0.0, 1.0)))

    def test_camera_back_projection_terms(self):
        cam = CameraModel(T=(0.0, 0.5, 0.0))
        np.testing.assert_allclose(cam.B, [0.0, -0.5, 0.0])
        np.testing.assert_allclose(cam.A @ cam.K, np.eye(3), atol=1e-12)

    def test_config_rejects_unknown_fields(self):
        with self.assertRaises(ValueError):
            GiouTableConfig.model_validate({"offsets": [0.0], "yaw": [0.0]})


if __name__ == "__main__":
    unittest.main()
