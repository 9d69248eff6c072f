"""
Tests for internal time and the oscillator frequency profile.
"""
import math
from unittest import TestCase

import numpy as np
import pandas as pd
import pytest

from src.scattering.geodesic import initial_state, integrate
from src.scattering.itime import (
    FrequencyProfile,
    TauMap,
    extrema_statistics,
    gamma_from_frame,
    gamma_metric,
    internal_time,
    omega_profile,
    trajectory_profile,
    x2_from_z,
    z_coordinate,
)
from src.scattering.ray import extremal_ray, find_saddle, straight_ray
from src.scattering.surfaces import build_surface, load_surface, parse_surface_definition
from src.scattering.system import HBAR, MomentumField
from src.utils.config import CONFIG_DIR
from src.utils.errors import (
    AsymptoteError,
    DomainError,
    FrameBreakdownError,
    ProjectionError,
    TurningPointError,
)


def quadratic(**params):
    return build_surface(
        parse_surface_definition(
            {
                "kind": "quadratic",
                "mu0": 1.0,
                "params": params,
                "domain": {"x1_min": -5, "x1_max": 5, "x2_min": -5, "x2_max": 5},
                "asymptotic_radius": 3.0,
            }
        )
    )


class TestFreeFlightInternalTime(TestCase):
    """Test cases on a flat surface with a straight reference ray."""

    @classmethod
    def setUpClass(cls):
        """Set up a flat surface, its straight ray and one trajectory at E = 1."""
        cls.surface = quadratic()
        cls.field = MomentumField(cls.surface, 1.0, 1.0)
        cls.ray = straight_ray(cls.surface, 1.0, (-4.0, 0.0), (4.0, 0.0), spacing=0.01)
        cls.traj = integrate(cls.field, initial_state(cls.field, 0.1))

    def test_tau_map(self):
        """Test tau = P0 sigma / E_k on a flat ray."""
        tau_map = TauMap(self.ray, 1.0)
        sigma = np.array([-2.0, 0.0, 1.5])

        np.testing.assert_allclose(tau_map(sigma), math.sqrt(2.0) * sigma, atol=1e-9)
        np.testing.assert_allclose(tau_map.derivative(sigma), math.sqrt(2.0), rtol=1e-9)

    def test_tau_map_error_estimates(self):
        """Test that both quadrature error estimates vanish for a constant integrand."""
        meta = TauMap(self.ray, 1.0).meta

        self.assertEqual((meta["nodes"], meta["check_nodes"]), (5, 7))
        self.assertLess(meta["quadrature_error"], 1e-12)
        self.assertLess(meta["resolution_error"], 1e-12)

    def test_unit_rate_along_the_ray(self):
        """Test dtau/ds = 1 for a straight trajectory parallel to the ray."""
        series = internal_time(self.traj, self.ray, 1.0)

        self.assertTrue(series.monotone)
        np.testing.assert_allclose(series.dtau_ds, 1.0, rtol=1e-6)
        np.testing.assert_allclose(series.offset, 0.1, atol=1e-9)
        np.testing.assert_allclose(series.sigma, self.traj.x[:, 0], atol=1e-9)
        self.assertEqual(list(series.to_frame().columns), ["s", "tau", "dtau_ds"])

    def test_outside_tube(self):
        """Test a ProjectionError when the trajectory leaves the tube."""
        with pytest.raises(ProjectionError):
            internal_time(self.traj, self.ray, 1.0, tube_radius=0.05)

    def test_gamma_metric_on_flat_ray(self):
        """Test that the ray-adapted metric is Euclidean on a straight flat ray."""
        g11, g22 = gamma_metric(self.ray, 10, 0.3)

        self.assertAlmostEqual(g11, 1.0)
        self.assertAlmostEqual(g22, 1.0)
        self.assertEqual(gamma_from_frame(self.ray.to_frame(), 10, 0.3), (g11, g22))

    def test_frame_breakdown(self):
        """Test a FrameBreakdownError when 1 + x2/rho2 is not positive."""
        frame = pd.DataFrame({"lambda": [0.1], "rho1_inv": [0.0], "rho2_inv": [2.0]})

        with pytest.raises(FrameBreakdownError):
            gamma_from_frame(frame, 0, -0.5)


class TestHarmonicChannel(TestCase):
    """Test cases for Omega^2 in a harmonic transverse well."""

    def setUp(self):
        """Set up V = 2 x2^2 and a straight ray along x1."""
        surface = quadratic(k22=4.0)
        self.field = MomentumField(surface, 1.0, 1.0)
        self.ray = straight_ray(surface, 1.0, (-4.0, 0.0), (4.0, 0.0), spacing=0.02)

    def test_constant_frequency(self):
        """Test Omega^2 = k / (4 mu0) everywhere."""
        profile = omega_profile(self.ray, self.field, 1.0)

        np.testing.assert_allclose(profile.omega_sq, 1.0, rtol=1e-9)
        self.assertAlmostEqual(profile.omega_in, 1.0)
        self.assertAlmostEqual(profile.omega_out, 1.0)
        np.testing.assert_allclose(profile.meta["sigma"], self.ray.arclength)

    def test_flipped_variant_has_negative_tails(self):
        """Test that the flipped sign gives an unphysical negative asymptote."""
        with pytest.raises(AsymptoteError):
            omega_profile(self.ray, self.field, 1.0, variant="flipped")

    def test_unknown_variant(self):
        """Test that an unknown variant is rejected."""
        with pytest.raises(ValueError):
            omega_profile(self.ray, self.field, 1.0, variant="mirrored")


class TestReflectedInternalTime(TestCase):
    """Test cases for internal time of a trajectory reflected by the Eckart barrier."""

    @classmethod
    def setUpClass(cls):
        """Trace the ray at E = 1.5 and a reflected trajectory at E = 0.5."""
        cls.surface = load_surface(CONFIG_DIR / "surfaces" / "separable_eckart.json")
        saddle = find_saddle(cls.surface, (0.1, 0.1))
        cls.ray = extremal_ray(cls.surface, 1.5, saddle, spacing=0.01)
        field = MomentumField(cls.surface, 0.5, 1.0)
        cls.traj = integrate(field, initial_state(field, 0.0))
        cls.series = internal_time(cls.traj, cls.ray, 0.5)

    def test_reflection_folds_tau(self):
        """Test a single maximum of tau at the turning point."""
        self.assertFalse(self.series.monotone)
        self.assertEqual(len(self.series.extrema), 1)
        extremum = self.series.extrema[0]
        self.assertEqual(extremum.kind, "max")
        self.assertGreater(extremum.left, 0.0)
        self.assertLess(extremum.right, 0.0)
        self.assertLess(self.series.tau[-1], extremum.tau)

    def test_extrema_statistics(self):
        """Test the summary of a single reversal."""
        stats = extrema_statistics(self.series)

        self.assertEqual(stats["count"], 1)
        self.assertEqual(stats["tau_spans"], [])
        self.assertGreater(stats["max_jump"], 0.0)

    def test_trajectory_profile_of_reflection(self):
        """Test that a reflected trajectory ends on the (in) frequency."""
        field = MomentumField(self.surface, 1.5, 1.0)
        ray_profile = omega_profile(self.ray, field, 1.5)
        profile = trajectory_profile(self.series, ray_profile)

        self.assertAlmostEqual(ray_profile.omega_in, 1.0, places=6)
        self.assertEqual(profile.omega_out, ray_profile.omega_in)
        np.testing.assert_array_equal(profile.u, self.series.s)
        self.assertEqual(len(profile.omega_sq), len(self.series.s))

    def test_tau_map_quadrature_tolerance(self):
        """Test the 5-node against the 7-node rule on the curved Eckart profile."""
        tau_map = TauMap(self.ray, 1.5)

        self.assertEqual(tau_map.meta["rule"], "gauss-legendre")
        self.assertLess(tau_map.meta["quadrature_error"], 1e-10)
        self.assertLess(tau_map.meta["resolution_error"], 1e-6)
        self.assertTrue(np.all(np.diff(tau_map.tau) > 0.0))

    def test_forbidden_ray(self):
        """Test a TurningPointError when the ray crosses the barrier below its top."""
        ray = straight_ray(self.surface, 0.5, (-13.0, 0.0), (13.0, 0.0), spacing=0.05)

        with pytest.raises(TurningPointError):
            TauMap(ray, 0.5)


class TestProfileHelpers(TestCase):
    """Test cases for coordinate scaling and profile transforms."""

    def test_z_coordinate(self):
        """Test the scaled transverse coordinate and its inverse."""
        z = z_coordinate(0.2, 2.0, 1.5)

        self.assertAlmostEqual(z, 0.4 / math.sqrt(HBAR * 1.5))
        self.assertAlmostEqual(x2_from_z(z, 2.0, 1.5), 0.2)
        with pytest.raises(DomainError):
            z_coordinate(0.2, 0.0, 1.5)
        with pytest.raises(DomainError):
            z_coordinate(0.2, 1.0, -1.0)

    def test_shift_and_reverse(self):
        """Test translation and time reversal of a profile."""
        profile = FrequencyProfile(
            tau=np.array([-1.0, 0.0, 2.0]),
            omega_sq=np.array([1.0, 3.0, 4.0]),
            omega_in=1.0,
            omega_out=2.0,
        )
        shifted = profile.shifted(0.5)
        backwards = profile.reversed()

        np.testing.assert_allclose(shifted.tau, [-0.5, 0.5, 2.5])
        np.testing.assert_allclose(backwards.tau, [-2.0, 0.0, 1.0])
        np.testing.assert_allclose(backwards.omega_sq, [4.0, 3.0, 1.0])
        self.assertEqual((backwards.omega_in, backwards.omega_out), (2.0, 1.0))
        np.testing.assert_allclose(profile.rate, 1.0)
