#!/usr/bin/env python3
"""
Integration tests for the experiment runner.

Each subcommand is run end to end through main() with small parameters,
checking exit codes, the CSV layout and the printed summaries.
"""

import json
import os
import sys
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pandas as pd
import pytest
from PIL import Image

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from mono3d.geometry import dump_boxes, random_box_set  # noqa: E402
from run_experiment import EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, load_experiment, main  # noqa: E402


NMS_COLUMNS = [
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
CONVERGENCE_COLUMNS = [
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


def printed(mock_print) -> str:
    """Everything passed to print() during a run."""
    return "\n".join(" ".join(str(arg) for arg in call.args) for call in mock_print.call_args_list)


class CliTestCase(unittest.TestCase):
    """Temporary output directory per test."""

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def path(self, name: str) -> str:
        return str(self.tmp / name)

    def write_json(self, name: str, data) -> str:
        path = self.tmp / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return str(path)


class TestSubcommands(CliTestCase):
    """Every subcommand succeeds and writes its table."""

    @patch("builtins.print")
    def test_nms_compare(self, mock_print):
        out = self.path("nms.csv")
        self.assertEqual(main(["nms-compare", "--n-boxes", "12", "--seed", "3", "--output", out]), EXIT_OK)
        frame = pd.read_csv(out)
        self.assertEqual(list(frame.columns), NMS_COLUMNS)
        kept = frame["kept"] == 1
        self.assertTrue(set(frame["kept"]) <= {0, 1})
        if kept.any() and not kept.all():
            self.assertGreater(frame.loc[kept, "rescore_groomed"].min(), frame.loc[~kept, "rescore_groomed"].max())
        self.assertEqual(len(frame), 12)
        self.assertIn("nms-compare completed", printed(mock_print))

    @patch("builtins.print")
    def test_nms_compare_with_ground_truths(self, mock_print):
        boxes = random_box_set(10, seed=4)
        boxes_path = self.write_json("boxes.json", dump_boxes(boxes))
        gts_path = self.write_json("gts.json", dump_boxes(boxes[:2]))
        out = self.path("nms.csv")
        code = main(["nms-compare", "--boxes", boxes_path, "--gts", gts_path, "--output", out])
        self.assertEqual(code, EXIT_OK)
        ap_table = pd.read_csv(self.path("nms_ap.csv"))
        self.assertEqual(len(ap_table), 10)
        self.assertEqual(list(ap_table.columns), ["box_id", "rescore", "label", "rank", "per_image_ap", "image"])

    @patch("builtins.print")
    def test_convergence_sim(self, mock_print):
        out = self.path("conv.csv")
        args = ["convergence-sim", "--trials", "200", "--steps", "50", "--mc-samples", "10000", "--workers", "1"]
        self.assertEqual(main(args + ["--output", out]), EXIT_OK)
        frame = pd.read_csv(out)
        self.assertEqual(len(frame), 3)
        self.assertEqual(list(frame.columns), CONVERGENCE_COLUMNS)
        self.assertEqual(frame["kind"].tolist(), ["l1", "l2", "dice"])

    @patch("builtins.print")
    def test_depth_trend(self, mock_print):
        out = self.path("depth.csv")
        self.assertEqual(main(["depth-trend", "--steps", "3", "--trials", "10", "--output", out]), EXIT_OK)
        frame = pd.read_csv(out)
        self.assertEqual(
            list(frame.columns),
            [
                "dh",
                "mean_err_ground",
                "mean_err_regressed",
                "mean_err_merged",
                "se",
                "ground_residual",
                "mean_err_ground_exact",
            ],
        )
        np.testing.assert_allclose(frame["dh"], [-0.7, 0.03, 0.76])

    @patch("builtins.print")
    def test_equivariance_check(self, mock_print):
        out = self.path("equiv.csv")
        args = ["equivariance-check", "--n-images", "2", "--image-size", "32", "--scales", "0.909,1.0"]
        self.assertEqual(main(args + ["--output", out]), EXIT_OK)
        frame = pd.read_csv(out)
        self.assertEqual(frame["scale"].tolist(), [0.909, 1.0])
        self.assertAlmostEqual(frame["delta_ses"].iloc[1], 0.0, places=9)

    @patch("builtins.print")
    def test_giou_table(self, mock_print):
        out = self.path("giou.csv")
        args = ["giou-table", "--offsets", "0,0.5,2", "--yaws", "0", "--resolution", "16", "--output", out]
        self.assertEqual(main(args), EXIT_OK)
        frame = pd.read_csv(out)
        self.assertEqual(len(frame), 3)
        self.assertAlmostEqual(frame["iou3d"].iloc[0], 1.0, places=9)
        self.assertAlmostEqual(frame["iou3d"].iloc[1], 1.0 / 3.0, places=9)
        self.assertEqual(frame["iou3d"].iloc[2], 0.0)
        self.assertTrue((frame["giou3d"] <= frame["iou3d"] + 1e-12).all())

    @patch("builtins.print")
    def test_repeated_runs_are_identical(self, mock_print):
        first, second = self.path("a.csv"), self.path("b.csv")
        for out in (first, second):
            self.assertEqual(main(["nms-compare", "--n-boxes", "15", "--seed", "9", "--output", out]), EXIT_OK)
            self.assertEqual(main(["depth-trend", "--steps", "2", "--trials", "5", "--output", out + ".d"]), EXIT_OK)
        self.assertEqual(Path(first).read_bytes(), Path(second).read_bytes())
        self.assertEqual(Path(first + ".d").read_bytes(), Path(second + ".d").read_bytes())


class TestConfigFiles(CliTestCase):
    """--config handling and summaries."""

    @patch("builtins.print")
    def test_flags_override_config(self, mock_print):
        config = self.write_json("giou.json", {"command": "giou-table", "offsets": [0.0, 1.0], "yaws": [0.0, 0.5]})
        out = self.path("giou.csv")
        self.assertEqual(main(["giou-table", "--config", config, "--yaws", "0", "--output", out]), EXIT_OK)
        frame = pd.read_csv(out)
        self.assertEqual(frame["offset"].tolist(), [0.0, 1.0])
        self.assertEqual(frame["yaw"].tolist(), [0.0, 0.0])

    @patch("builtins.print")
    def test_summary_file(self, mock_print):
        summary = self.path("summary.json")
        args = ["giou-table", "--offsets", "0", "--yaws", "0", "--output", self.path("g.csv")]
        self.assertEqual(main(args + ["--summary-file", summary]), EXIT_OK)
        data = json.loads(Path(summary).read_text(encoding="utf-8"))
        self.assertEqual(data["status"], "done")
        self.assertEqual(data["output"]["rows"], 1)
        self.assertNotIn("updated_at", data)
        self.assertIn("Summary saved to", printed(mock_print))


class TestExitCodes(CliTestCase):
    """Usage, input and numerical failures map onto distinct exit codes."""

    @patch("builtins.print")
    def test_usage_errors(self, mock_print):
        with patch("sys.stderr"):
            self.assertEqual(main([]), EXIT_USAGE)
            self.assertEqual(main(["nms-compare", "--nt", "abc"]), EXIT_USAGE)
            self.assertEqual(main(["unknown-command"]), EXIT_USAGE)

    @patch("builtins.print")
    def test_malformed_config_reports_position(self, mock_print):
        config = self.tmp / "bad.json"
        config.write_text('{"nt": 0.4,\n "prune": }', encoding="utf-8")
        self.assertEqual(main(["nms-compare", "--config", str(config)]), EXIT_INPUT)
        self.assertIn("line 2", printed(mock_print))

    @patch("builtins.print")
    def test_missing_config(self, mock_print):
        self.assertEqual(main(["giou-table", "--config", self.path("absent.json")]), EXIT_INPUT)

    @patch("builtins.print")
    def test_config_for_other_command(self, mock_print):
        config = self.write_json("other.json", {"command": "depth-trend"})
        self.assertEqual(main(["giou-table", "--config", config]), EXIT_INPUT)

    @patch("builtins.print")
    def test_invalid_parameter(self, mock_print):
        self.assertEqual(main(["nms-compare", "--nt", "1.5", "--output", self.path("n.csv")]), EXIT_INPUT)
        self.assertIn("NMS_COMPARE_FAIL", printed(mock_print))

    @patch("builtins.print")
    def test_malformed_boxes(self, mock_print):
        boxes = self.tmp / "boxes.json"
        boxes.write_text('[{"cx": 1.0,', encoding="utf-8")
        self.assertEqual(main(["nms-compare", "--boxes", str(boxes), "--output", self.path("n.csv")]), EXIT_INPUT)

    @patch("builtins.print")
    def test_blank_image_is_numerical_failure(self, mock_print):
        image = self.tmp / "black.png"
        Image.fromarray(np.zeros((16, 16), dtype=np.uint8)).save(image)
        args = ["equivariance-check", "--images", str(image), "--output", self.path("e.csv")]
        self.assertEqual(main(args), EXIT_NUMERICAL)
        self.assertFalse((self.tmp / "e.csv").exists())


COMMANDS = ["nms-compare", "convergence-sim", "depth-trend", "equivariance-check", "giou-table"]


@pytest.mark.parametrize("command", COMMANDS)
def test_sample_inputs_validate(command):
    package = load_experiment(command)
    sample = Path(package.__file__).parent / "test_input.json"
    config = package.validate(json.loads(sample.read_text(encoding="utf-8")))
    assert config.command.value == command


def test_default_output_directory(output_dir):
    assert main(["giou-table", "--offsets", "0", "--yaws", "0", "--resolution", "16"]) == EXIT_OK
    assert (output_dir / "giou_table.csv").exists()


if __name__ == "__main__":
    unittest.main()
