"""
Tests for the pipeline stages behind the subcommands.
"""
import json
import tempfile
from pathlib import Path
from unittest import TestCase

import pandas as pd
import pytest

from src.pipeline.runner import (
    COMMANDS,
    default_saddle_guess,
    prepare,
    run_map,
    run_pipeline,
    stage,
)
from src.pipeline.settings import parse_run_config
from src.scattering.ray import extremal_ray, find_saddle
from src.utils.errors import ConfigError, PipelineError, TurningPointError
from src.utils.exports import ArtifactWriter, decode_pgm

EXAMPLE_SURFACE = "separable_eckart.json"


class TestRunner(TestCase):
    """Test cases for the run_* stages."""

    def setUp(self):
        """Set up a writer on a scratch directory."""
        self.tmp = tempfile.TemporaryDirectory()
        self.out = Path(self.tmp.name)
        self.writer = ArtifactWriter(self.out)

    def tearDown(self):
        """Remove the scratch directory."""
        self.tmp.cleanup()

    def config(self, **values):
        values.setdefault("surface", EXAMPLE_SURFACE)
        values.setdefault("out_dir", str(self.out))
        return parse_run_config(values)

    def read_json(self, name):
        return json.loads((self.out / name).read_text())

    def test_transitions_with_given_rho(self):
        """Test a transition matrix straight from a configured rho."""
        config = self.config(transitions={"rho": 1.0 / 9.0, "n_max": 4})

        summary = COMMANDS["transitions"](config, self.writer)

        self.assertAlmostEqual(summary["rho"], 1.0 / 9.0)
        self.assertEqual(summary["n_max"], 4)
        self.assertGreater(summary["literal_discrepancy"], 0.0)
        frame = pd.read_csv(self.out / "transitions.csv")
        self.assertEqual(list(frame.columns), ["m", "n0", "n1", "n2", "n3", "n4"])
        self.assertEqual(self.read_json("transitions.json")["n_max"], 4)
        variants = pd.read_csv(self.out / "transition_variants.csv")
        self.assertEqual(list(variants["variant"]), ["frozen", "literal"])
        self.assertIn("resolved_columns", variants.columns)

    def test_oscillator_on_named_profile(self):
        """Test rho of the sudden jump from omega 1 to 2."""
        config = self.config(oscillator={"profile": "sudden-jump"})

        summary = COMMANDS["oscillator"](config, self.writer)

        self.assertAlmostEqual(summary["rho"], 1.0 / 9.0, places=3)
        self.assertEqual(summary["profile"], "sudden-jump")
        self.assertTrue((self.out / "xi.csv").exists())

    def test_unknown_profile_parameter(self):
        """Test that a stray profile parameter is a configuration error."""
        config = self.config(oscillator={"profile": "constant", "profile_params": {"depth": 1.0}})

        with pytest.raises(ConfigError):
            COMMANDS["oscillator"](config, self.writer)

    def test_trajectory(self):
        """Test one classified trajectory over the barrier."""
        config = self.config(energy=1.5, x2_0=0.05)

        summary = COMMANDS["trajectory"](config, self.writer)

        self.assertEqual(summary["outcome"], "rearrange")
        self.assertLess(summary["time_reversal_error"], 1e-4)
        frame = pd.read_csv(self.out / "trajectory.csv")
        self.assertGreater(len(frame), 10)

    def test_trajectory_dwell_threshold_from_ray(self):
        """Test that an unset dwell threshold becomes three Jacobi lengths of the ray."""
        config = self.config(energy=1.5, x2_0=0.05)
        surface = prepare(config).surface
        saddle = find_saddle(surface, default_saddle_guess(surface))
        ray = extremal_ray(surface, 1.5, saddle)

        summary = COMMANDS["trajectory"](config, self.writer)

        threshold = summary["diagnostics"]["dwell_threshold"]
        self.assertAlmostEqual(threshold, 3.0 * ray.metric_length, places=6)
        self.assertLess(summary["dwell_length"], threshold)
        self.assertFalse(summary["resonance_flag"])

    def test_trajectory_configured_dwell_threshold(self):
        """Test that a configured dwell threshold is used as given."""
        config = self.config(energy=1.5, x2_0=0.05, integrator={"dwell_threshold": 1.0})

        summary = COMMANDS["trajectory"](config, self.writer)

        self.assertEqual(summary["diagnostics"]["dwell_threshold"], 1.0)
        self.assertTrue(summary["resonance_flag"])

    def test_map(self):
        """Test a two-cell map and its sidecar."""
        config = self.config(
            map={"e_range": [0.5, 1.5], "x2_range": [0.0, 0.0], "resolution": [2, 1]}
        )

        summary = run_map(config, self.writer, progress=False)

        self.assertEqual(summary["counts"]["reflect"], 1)
        self.assertEqual(summary["counts"]["rearrange"], 1)
        self.assertIsNone(summary["box_count"])
        image = decode_pgm((self.out / "map.pgm").read_bytes())
        self.assertEqual(image.shape, (1, 2))
        self.assertEqual(self.read_json("map.json")["shape"], [1, 2])

    @pytest.mark.slow
    def test_map_boundary_scaling(self):
        """Test that a straight reflect/rearrange boundary grows linearly with resolution."""
        config = self.config(
            map={
                "e_range": [0.5, 1.5],
                "x2_range": [-0.1, 0.1],
                "resolution": [2, 1],
                "scaling_resolutions": [2, 4],
            }
        )

        summary = run_map(config, self.writer, progress=False)

        scaling = summary["boundary_scaling"]
        self.assertEqual(scaling["resolutions"], [2, 4])
        self.assertEqual(scaling["counts"], [4, 8])
        self.assertAlmostEqual(scaling["slope"], 1.0, places=9)
        self.assertEqual(self.read_json("boundary_scaling.json")["counts"], [4, 8])

    def test_forbidden_start_names_its_stage(self):
        """Test that a forbidden start fails in the initial-state stage."""
        config = self.config(energy=0.5, x2_0=2.0)

        with pytest.raises(PipelineError) as excinfo:
            run_pipeline(config, self.writer)

        self.assertEqual(excinfo.value.stage, "initial-state")
        self.assertIsInstance(excinfo.value.cause, TurningPointError)

    def test_missing_surface(self):
        """Test that an unknown surface file is a configuration error."""
        config = self.config(surface=str(self.out / "missing.json"))

        with pytest.raises(ConfigError):
            COMMANDS["trajectory"](config, self.writer)

    @pytest.mark.slow
    def test_pipeline_end_to_end(self):
        """Test the full chain on a rearranging trajectory."""
        config = self.config(energy=1.5, x2_0=0.0, transitions={"n_max": 3})

        summary = run_pipeline(config, self.writer)

        self.assertEqual(summary["trajectory"]["outcome"], "rearrange")
        self.assertTrue(summary["monotone"])
        self.assertGreaterEqual(summary["rho"], 0.0)
        self.assertLess(summary["rho"], 1.0)
        for name in ("trajectory.csv", "ray.csv", "itime.csv", "xi.csv", "pipeline.json"):
            self.assertTrue((self.out / name).exists(), name)


class TestStage(TestCase):
    """Test cases for stage error wrapping."""

    def test_numerical_errors_are_wrapped(self):
        """Test that library errors carry the stage name."""
        with pytest.raises(PipelineError) as excinfo:
            with stage("ray"):
                raise TurningPointError("stuck")

        self.assertEqual(excinfo.value.stage, "ray")
        self.assertIn("stuck", str(excinfo.value))

    def test_config_errors_pass_through(self):
        """Test that configuration errors are not wrapped."""
        with pytest.raises(ConfigError):
            with stage("surface"):
                raise ConfigError("bad", [])
