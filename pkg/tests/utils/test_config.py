"""
Tests for the configuration module.
"""
import os
from unittest import TestCase, mock

from src.utils.config import get_config, get_run_defaults, is_config_valid, validate_config


class TestConfig(TestCase):
    """Test cases for the environment configuration layer."""

    @mock.patch.dict(
        os.environ,
        {
            "THREEBODY_OUT_DIR": "runs",
            "THREEBODY_THREADS": "4",
            "THREEBODY_SEED": "7",
            "THREEBODY_LOG_LEVEL": "debug",
            "THREEBODY_RTOL": "1e-8",
            "THREEBODY_ATOL": "1e-11",
            "THREEBODY_R_ASYM": "15.5",
        },
    )
    def test_get_run_defaults(self):
        """Test reading run defaults from the environment."""
        defaults = get_run_defaults()

        self.assertEqual(defaults["out_dir"], "runs")
        self.assertEqual(defaults["threads"], 4)
        self.assertEqual(defaults["seed"], 7)
        self.assertEqual(defaults["log_level"], "DEBUG")
        self.assertAlmostEqual(defaults["rtol"], 1e-8)
        self.assertAlmostEqual(defaults["atol"], 1e-11)
        self.assertAlmostEqual(defaults["r_asym"], 15.5)

    @mock.patch.dict(os.environ, {}, clear=True)
    def test_builtin_defaults(self):
        """Test the defaults used when nothing is set."""
        defaults = get_run_defaults()

        self.assertEqual(defaults["out_dir"], "output")
        self.assertEqual(defaults["threads"], 1)
        self.assertEqual(defaults["seed"], 12345)
        self.assertIsNone(defaults["r_asym"])
        self.assertIsNone(validate_config())

    @mock.patch.dict(os.environ, {"THREEBODY_THREADS": "0", "THREEBODY_LOG_LEVEL": "LOUD"})
    def test_validate_config_reports_problems(self):
        """Test that invalid values are reported together."""
        message = validate_config()

        self.assertIsNotNone(message)
        self.assertIn("THREEBODY_THREADS", message)
        self.assertIn("THREEBODY_LOG_LEVEL", message)
        self.assertFalse(is_config_valid())

    @mock.patch.dict(os.environ, {"THREEBODY_RTOL": "tight"})
    def test_validate_config_malformed_number(self):
        """Test that a non-numeric tolerance is reported, not raised."""
        message = validate_config()

        self.assertIsNotNone(message)
        self.assertIn("Malformed", message)

    @mock.patch.dict(os.environ, {"THREEBODY_R_ASYM": "-1"})
    def test_validate_config_negative_radius(self):
        """Test that a negative asymptotic radius is rejected."""
        self.assertIn("THREEBODY_R_ASYM", validate_config())

    @mock.patch.dict(os.environ, {"SOME_KEY": "value"})
    def test_get_config(self):
        """Test raw lookups with defaults."""
        self.assertEqual(get_config("SOME_KEY"), "value")
        self.assertEqual(get_config("MISSING_KEY", "fallback"), "fallback")
