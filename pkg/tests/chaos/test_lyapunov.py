"""
Tests for largest Lyapunov exponent estimates.
"""
import math
from unittest import TestCase

import pytest

from src.chaos.lyapunov import (
    LYAPUNOV_COLUMNS,
    LyapunovOptions,
    lyapunov_curve,
    lyapunov_max,
    shadow_lyapunov,
)
from src.scattering.geodesic import GeodesicState, initial_state
from src.scattering.surfaces import build_surface, load_surface, parse_surface_definition
from src.scattering.system import MomentumField
from src.utils.config import CONFIG_DIR
from src.utils.errors import DomainError, InsufficientLengthError
from tests.helpers import henon_heiles_surface, origin_state


def analytic_surface(kind, params):
    return build_surface(
        parse_surface_definition(
            {
                "kind": kind,
                "mu0": 1.0,
                "params": params,
                "domain": {"x1_min": -5, "x1_max": 5, "x2_min": -5, "x2_max": 5},
                "asymptotic_radius": 3.0,
            }
        )
    )


def ridge_state(sign):
    """Start on the Eckart ridge x1 = 0 moving along x2; P0^2 = 1 at E = 1.5."""
    return GeodesicState((0.0, 0.0), (0.0, sign))


class TestBoundOrbits(TestCase):
    """Test cases on closed systems integrated without exit events."""

    def test_isotropic_oscillator_is_regular(self):
        """Test a vanishing exponent for the isotropic harmonic oscillator."""
        field = MomentumField(analytic_surface("quadratic", {"k11": 1.0, "k22": 1.0}), 0.5, 1.0)
        opts = LyapunovOptions(s_total=100.0, stop_on_exit=False)
        estimate = lyapunov_max(field, origin_state(0.5, 0.3), opts)

        self.assertLess(abs(estimate.lambda_max), 0.02)
        self.assertEqual(estimate.status, "s_total")
        self.assertFalse(estimate.insufficient_length)
        self.assertEqual(list(estimate.history.columns), LYAPUNOV_COLUMNS)

    def test_shadow_estimate_is_regular(self):
        """Test the finite-separation estimate on the same oscillator."""
        field = MomentumField(analytic_surface("quadratic", {"k11": 1.0, "k22": 1.0}), 0.5, 1.0)
        opts = LyapunovOptions(s_total=100.0, stop_on_exit=False)
        estimate = shadow_lyapunov(field, origin_state(0.5, 0.3), opts)

        self.assertLess(abs(estimate.lambda_max), 0.02)
        self.assertEqual(estimate.meta["method"], "shadow")

    @pytest.mark.slow
    def test_henon_heiles_is_chaotic(self):
        """Test a positive exponent in the chaotic sea of Henon-Heiles at E = 0.16."""
        field = MomentumField(henon_heiles_surface(), 0.16, 1.0)
        opts = LyapunovOptions(s_total=150.0, stop_on_exit=False)
        estimate = lyapunov_max(field, origin_state(0.16, 0.3), opts)

        self.assertGreater(estimate.lambda_max, 0.05)
        self.assertAlmostEqual(estimate.s_reached, 150.0, delta=1e-6)


class TestCalibration(TestCase):
    """Test cases with known exponents on separable surfaces."""

    @classmethod
    def setUpClass(cls):
        """Follow the barrier-top orbit of the separable Eckart surface at E = 1.5."""
        surface = load_surface(CONFIG_DIR / "surfaces" / "separable_eckart.json")
        cls.field = MomentumField(surface, 1.5, 1.0)
        cls.opts = LyapunovOptions(s_total=200.0, stop_on_exit=False)
        cls.forward = lyapunov_max(cls.field, ridge_state(1.0), cls.opts)

    @pytest.mark.slow
    def test_separable_well_has_zero_exponent(self):
        """Test |lambda_max| < 1e-3 on a bound orbit of a separable harmonic well."""
        field = MomentumField(analytic_surface("quadratic", {"k11": 1.0, "k22": 2.0}), 0.5, 1.0)
        opts = LyapunovOptions(s_total=400.0, stop_on_exit=False)
        estimate = lyapunov_max(field, origin_state(0.5, 0.3), opts)

        self.assertLess(abs(estimate.lambda_max), 1e-3)

    def test_barrier_top_orbit(self):
        """Test the exponent sqrt(-V11 / mu0) = sqrt(2) on the barrier ridge."""
        self.assertAlmostEqual(self.forward.lambda_max, math.sqrt(2.0), delta=0.02 * math.sqrt(2.0))
        self.assertAlmostEqual(self.forward.s_reached, 200.0, delta=1e-6)

    def test_renorm_interval_doubling(self):
        """Test a change below 2% when the renormalization interval doubles."""
        opts = LyapunovOptions(renorm_interval=2.0, s_total=200.0, stop_on_exit=False)
        doubled = lyapunov_max(self.field, ridge_state(1.0), opts)

        change = abs(doubled.lambda_max - self.forward.lambda_max) / self.forward.lambda_max
        self.assertLess(change, 0.02)

    def test_time_reversed_orbit(self):
        """Test that the reversed orbit gives the forward estimate within 5%."""
        backward = lyapunov_max(self.field, ridge_state(-1.0), self.opts)

        change = abs(backward.lambda_max - self.forward.lambda_max) / self.forward.lambda_max
        self.assertLess(change, 0.05)


class TestScatteringRuns(TestCase):
    """Test cases for open trajectories that leave the interaction region."""

    def test_short_run_is_flagged(self):
        """Test the insufficient-length flag for a direct free flight."""
        field = MomentumField(analytic_surface("constant", {}), 1.0, 1.0)
        estimate = lyapunov_max(field, initial_state(field, 0.0))

        self.assertEqual(estimate.status, "exited")
        self.assertTrue(estimate.insufficient_length)
        self.assertLess(estimate.s_reached, 20.0)
        with pytest.raises(InsufficientLengthError):
            lyapunov_max(field, initial_state(field, 0.0), strict=True)

    def test_options_validated(self):
        """Test that s_total must exceed the renormalization interval."""
        with pytest.raises(DomainError):
            LyapunovOptions(renorm_interval=1.0, s_total=0.5)

    def test_curve_records_failures(self):
        """Test one row per energy with forbidden starts recorded as errors."""
        surface = load_surface(CONFIG_DIR / "surfaces" / "separable_eckart.json")
        opts = LyapunovOptions(min_length=1.0)
        curve = lyapunov_curve(surface, [0.5, 1.5], 0.0, opts)
        forbidden = lyapunov_curve(surface, [0.5], 2.0, opts)

        self.assertEqual(list(curve["energy"]), [0.5, 1.5])
        self.assertEqual(list(curve["error"]), ["", ""])
        self.assertEqual(forbidden["error"][0], "TurningPointError")
        self.assertTrue(math.isnan(forbidden["lambda_time"][0]))
