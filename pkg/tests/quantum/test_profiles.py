"""
Tests for analytic frequency profiles.
"""
import math
import tempfile
from pathlib import Path
from unittest import TestCase

import numpy as np
import pandas as pd
import pytest

from src.quantum.profiles import (
    constant_profile,
    load_profile,
    named_profile,
    random_smooth_profile,
    sudden_jump_profile,
    sudden_jump_reflection,
    tanh_profile,
    tanh_reflection,
)
from src.utils.errors import ConfigError, DomainError


class TestProfiles(TestCase):
    """Test cases for profile builders."""

    def test_constant(self):
        """Test a flat profile."""
        profile = constant_profile(1.5, span=4.0, samples=41)

        np.testing.assert_allclose(profile.omega_sq, 2.25)
        self.assertEqual((profile.omega_in, profile.omega_out), (1.5, 1.5))
        self.assertEqual(profile.tau[0], -4.0)

    def test_sudden_jump_breakpoint(self):
        """Test that the step is stored as a repeated tau = 0 sample."""
        profile = sudden_jump_profile(1.0, 2.0, span=2.0, samples=201)
        zeros = np.nonzero(profile.tau == 0.0)[0]

        self.assertEqual(len(zeros), 2)
        self.assertEqual(profile.omega_sq[zeros[0]], 1.0)
        self.assertEqual(profile.omega_sq[zeros[1]], 4.0)
        self.assertTrue(np.all(np.diff(profile.tau) >= 0))

    def test_tanh_ends_on_asymptotes(self):
        """Test the default span of the tanh switch."""
        profile = tanh_profile(1.0, 2.0, width=0.5)

        self.assertAlmostEqual(profile.omega_sq[0], 1.0, places=12)
        self.assertAlmostEqual(profile.omega_sq[-1], 4.0, places=12)
        self.assertEqual(profile.meta["width"], 0.5)

    def test_random_smooth_is_seeded(self):
        """Test reproducibility and the positive floor of random profiles."""
        first = random_smooth_profile(seed=7)
        again = random_smooth_profile(seed=7)
        other = random_smooth_profile(seed=8)

        np.testing.assert_array_equal(first.omega_sq, again.omega_sq)
        self.assertFalse(np.array_equal(first.omega_sq, other.omega_sq))
        self.assertGreaterEqual(float(np.min(first.omega_sq)), 0.25)

    def test_non_positive_frequency(self):
        """Test that zero frequencies are rejected."""
        with pytest.raises(DomainError):
            constant_profile(0.0)
        with pytest.raises(DomainError):
            tanh_profile(1.0, 2.0, width=-1.0)

    def test_named_profile(self):
        """Test building profiles by name."""
        self.assertEqual(named_profile("tanh", width=2.0).meta["width"], 2.0)
        self.assertEqual(named_profile("sudden-jump").name, "sudden-jump")
        with pytest.raises(ConfigError):
            named_profile("sawtooth")


class TestReflectionFormulas(TestCase):
    """Test cases for closed-form reflection parameters."""

    def test_sudden_jump(self):
        """Test rho = ((w2 - w1) / (w2 + w1))^2."""
        self.assertAlmostEqual(sudden_jump_reflection(1.0, 2.0), 1.0 / 9.0)
        self.assertEqual(sudden_jump_reflection(1.3, 1.3), 0.0)

    def test_tanh(self):
        """Test the sinh ratio and its adiabatic limit."""
        expected = math.sinh(math.pi * 0.5) ** 2 / math.sinh(math.pi * 1.5) ** 2

        self.assertAlmostEqual(tanh_reflection(1.0, 2.0, 1.0), expected, places=14)
        self.assertAlmostEqual(tanh_reflection(2.0, 1.0, 1.0), expected, places=14)
        self.assertLess(tanh_reflection(1.0, 2.0, 50.0), 1e-100)
        self.assertLess(tanh_reflection(1.0, 2.0, 1e-4), sudden_jump_reflection(1.0, 2.0))


class TestLoadProfile(TestCase):
    """Test cases for tabulated profile files."""

    def write(self, directory, frame):
        path = Path(directory) / "profile.csv"
        frame.to_csv(path, index=False)
        return path

    def test_load(self):
        """Test asymptotes from the first and last rows."""
        tau = np.linspace(-5.0, 5.0, 11)
        frame = pd.DataFrame({"tau": tau, "omega_sq": np.where(tau < 0, 1.0, 2.25)})
        with tempfile.TemporaryDirectory() as tmp:
            profile = load_profile(self.write(tmp, frame))

        self.assertEqual(profile.omega_in, 1.0)
        self.assertEqual(profile.omega_out, 1.5)
        self.assertIsNone(profile.u)
        self.assertEqual(profile.name, "profile")

    def test_folded_columns(self):
        """Test that u and dtau_du are read when present."""
        frame = pd.DataFrame(
            {
                "tau": [0.0, 1.0, 0.5],
                "omega_sq": [1.0, 1.0, 1.0],
                "u": [0, 1, 2],
                "dtau_du": [1, 0, -1],
            }
        )
        with tempfile.TemporaryDirectory() as tmp:
            profile = load_profile(self.write(tmp, frame))

        np.testing.assert_array_equal(profile.u, [0.0, 1.0, 2.0])
        np.testing.assert_array_equal(profile.rate, [1.0, 0.0, -1.0])

    def test_missing_column(self):
        """Test a ConfigError when omega_sq is absent."""
        with tempfile.TemporaryDirectory() as tmp:
            path = self.write(tmp, pd.DataFrame({"tau": [0.0, 1.0]}))
            with pytest.raises(ConfigError):
                load_profile(path)

    def test_negative_asymptote(self):
        """Test a DomainError for a non-oscillatory end."""
        with tempfile.TemporaryDirectory() as tmp:
            path = self.write(tmp, pd.DataFrame({"tau": [0.0, 1.0], "omega_sq": [1.0, -1.0]}))
            with pytest.raises(DomainError):
                load_profile(path)
