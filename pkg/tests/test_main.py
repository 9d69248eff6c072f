"""
Tests for the command-line entry point.
"""
import json
import tempfile
from pathlib import Path
from unittest import TestCase

import pytest

from src.main import (
    EXIT_CONFIG,
    EXIT_MISMATCH,
    EXIT_NUMERICAL,
    EXIT_OK,
    collect_overrides,
    main,
    setup_parser,
)
from src.utils.config import CONFIG_DIR


class TestParser(TestCase):
    """Test cases for argument parsing."""

    def test_global_flags_on_either_side(self):
        """Test that global flags work before and after the subcommand."""
        parser = setup_parser()

        before = parser.parse_args(["--seed", "5", "trajectory", "--energy", "1.2"])
        after = parser.parse_args(["trajectory", "--seed", "5", "--x2", "0.1"])

        self.assertEqual(before.seed, 5)
        self.assertEqual(after.seed, 5)
        self.assertEqual(after.x2_0, 0.1)

    def test_collect_overrides(self):
        """Test the mapping from flags onto config sections."""
        args = setup_parser().parse_args(["map", "--resolution", "8", "4", "--threads", "2"])

        overrides = collect_overrides(args)

        self.assertEqual(overrides["map"], {"resolution": [8, 4]})
        self.assertEqual(overrides["threads"], 2)
        self.assertIsNone(overrides["energy"])

    def test_unknown_flag(self):
        """Test that argparse rejects unknown flags with status 2."""
        with pytest.raises(SystemExit) as excinfo:
            main(["trajectory", "--warp", "9"])

        self.assertEqual(excinfo.value.code, EXIT_CONFIG)


class TestMain(TestCase):
    """Test cases for exit codes and reruns."""

    def setUp(self):
        """Set up a scratch output directory."""
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        """Remove the scratch directory."""
        self.tmp.cleanup()

    def run_cli(self, *argv):
        return main([*argv, "--out-dir", str(self.dir / "run")])

    def test_no_command(self):
        """Test that a bare invocation prints help and exits 2."""
        self.assertEqual(main([]), EXIT_CONFIG)

    def test_invalid_config(self):
        """Test exit 2 on a config that fails validation."""
        path = self.dir / "run.json"
        path.write_text(json.dumps({"energy": -1.0}))

        self.assertEqual(self.run_cli("trajectory", "--config", str(path)), EXIT_CONFIG)

    def test_forbidden_start(self):
        """Test exit 3 when the start point is classically forbidden."""
        code = self.run_cli(
            "trajectory", "--surface", "separable_eckart.json", "--energy", "0.5", "--x2", "2.0"
        )

        self.assertEqual(code, EXIT_NUMERICAL)

    def test_rerun_reproduces_outputs(self):
        """Test that a rerun reproduces every output hash."""
        code = self.run_cli("transitions", "--rho", "0.2", "--n-max", "5")
        manifest = self.dir / "run" / "manifest.json"

        self.assertEqual(code, EXIT_OK)
        self.assertTrue(manifest.exists())
        self.assertEqual(main(["rerun", str(manifest)]), EXIT_OK)
        self.assertEqual(main(["rerun", str(manifest), "--out-dir", str(self.dir / "again")]), 0)
        self.assertEqual(
            (self.dir / "run" / "transitions.csv").read_bytes(),
            (self.dir / "again" / "transitions.csv").read_bytes(),
        )

    def test_rerun_detects_mismatch(self):
        """Test exit 1 when a recorded hash no longer matches."""
        self.run_cli("transitions", "--rho", "0.2", "--n-max", "5")
        manifest = self.dir / "run" / "manifest.json"
        data = json.loads(manifest.read_text())
        data["outputs"]["transitions.csv"] = "0" * 64
        manifest.write_text(json.dumps(data))

        self.assertEqual(main(["rerun", str(manifest)]), EXIT_MISMATCH)

    def test_map_rerun_on_more_workers(self):
        """Test that a map rerun with another worker count reproduces the PGM."""
        code = self.run_cli(
            "map", "--surface", "separable_eckart.json", "--resolution", "3", "2", "--threads", "1"
        )
        manifest = self.dir / "run" / "manifest.json"
        self.assertEqual(code, EXIT_OK)

        data = json.loads(manifest.read_text())
        data["parameters"]["threads"] = 2
        manifest.write_text(json.dumps(data))

        self.assertEqual(main(["rerun", str(manifest), "--out-dir", str(self.dir / "again")]), 0)
        self.assertEqual(
            (self.dir / "run" / "map.pgm").read_bytes(),
            (self.dir / "again" / "map.pgm").read_bytes(),
        )

    @pytest.mark.slow
    def test_example_config_trajectory(self):
        """Test the trajectory subcommand on the shipped example config."""
        code = self.run_cli("trajectory", "--config", str(CONFIG_DIR / "example_run.json"))

        self.assertEqual(code, EXIT_OK)
        self.assertTrue((self.dir / "run" / "trajectory.csv").exists())
        self.assertTrue((self.dir / "run" / "manifest.json").exists())

    def test_rerun_missing_manifest(self):
        """Test exit 2 for a manifest that does not exist."""
        self.assertEqual(main(["rerun", str(self.dir / "absent.json")]), EXIT_CONFIG)
