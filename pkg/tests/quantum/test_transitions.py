"""
Tests for transition probabilities, exact oscillator states and the number-state oracle.
"""
import math
from unittest import TestCase

import numpy as np
import pytest

from src.quantum.oscillator import OscillatorSolution, solve_xi
from src.quantum.profiles import (
    constant_profile,
    sudden_jump_profile,
    sudden_jump_reflection,
    tanh_profile,
)
from src.quantum.transitions import (
    literal_discrepancy,
    number_state_oracle,
    oracle_agreement,
    parity_leak,
    resolved_columns,
    transition_matrix,
    transition_probability,
    transition_summaries,
    wave_overlap,
    wave_sample,
    wavefunction,
)
from src.utils.errors import CausticError, DomainError, TruncationDeficitError


class TestTransitionProbability(TestCase):
    """Test cases for single transition probabilities."""

    def test_sudden_jump_values(self):
        """Test W00 and W20 for rho = 1/9."""
        rho = 1.0 / 9.0

        self.assertAlmostEqual(transition_probability(0, 0, rho), math.sqrt(8.0 / 9.0))
        self.assertAlmostEqual(
            transition_probability(2, 0, rho), 0.5 * math.sqrt(1.0 - rho) * rho
        )

    def test_parity_selection(self):
        """Test that odd changes of the quantum number are forbidden."""
        self.assertEqual(transition_probability(3, 0, 0.4), 0.0)
        self.assertEqual(transition_probability(2, 5, 0.4), 0.0)

    def test_detailed_balance(self):
        """Test W_mn = W_nm."""
        self.assertAlmostEqual(transition_probability(5, 1, 0.3), transition_probability(1, 5, 0.3))

    def test_invalid_input(self):
        """Test rejection of rho outside [0, 1) and bad quantum numbers."""
        with pytest.raises(DomainError):
            transition_probability(0, 0, 1.0)
        with pytest.raises(DomainError):
            transition_probability(0, 0, -0.1)
        with pytest.raises(DomainError):
            transition_probability(-1, 0, 0.1)
        with pytest.raises(DomainError):
            transition_probability(0, 0, 0.1, variant="mirrored")


class TestTransitionMatrix(TestCase):
    """Test cases for the truncated probability grid."""

    def test_identity_without_reflection(self):
        """Test W = I at rho = 0."""
        matrix = transition_matrix(0.0, 6)

        np.testing.assert_allclose(matrix.W, np.eye(7), atol=1e-15)
        np.testing.assert_allclose(matrix.mean_gain(), 0.0, atol=1e-15)
        self.assertFalse(matrix.truncation_flag)

    def test_columns_sum_to_one(self):
        """Test probability conservation for low columns with a generous n_max."""
        matrix = transition_matrix(1.0 / 9.0, 40)

        np.testing.assert_allclose(matrix.column_sums[:6], 1.0, atol=1e-9)
        self.assertLess(matrix.epsilon_trunc, 1e-3)
        np.testing.assert_allclose(matrix.W, matrix.W.T)

    def test_truncation_ignores_unresolved_columns(self):
        """Test that columns pushed past n_max by the spread do not raise the deficit."""
        matrix = transition_matrix(1.0 / 9.0, 40)

        self.assertEqual(matrix.resolved, 12)
        self.assertEqual(resolved_columns(1.0 / 9.0, 40), 12)
        self.assertGreater(matrix.column_deficits[20], 1e-2)
        self.assertFalse(matrix.truncation_flag)
        self.assertEqual(matrix.summary()["resolved_columns"], 12)

    def test_resolved_columns(self):
        """Test the resolved range without reflection, at rho = 0.36 and when nothing fits."""
        self.assertEqual(resolved_columns(0.0, 6), 7)
        self.assertEqual(resolved_columns(0.36, 40), 5)
        self.assertEqual(resolved_columns(0.9, 4), 1)
        self.assertLess(transition_matrix(0.36, 40).epsilon_trunc, 1e-3)
        self.assertGreaterEqual(transition_matrix(0.36, 40).column_sums[0], 0.999)

    def test_matrix_matches_single_probabilities(self):
        """Test grid entries against transition_probability for both variants."""
        for variant in ("frozen", "literal"):
            matrix = transition_matrix(0.3, 12, variant, deficit_bound=1.0)
            for m, n in ((0, 0), (2, 0), (5, 3), (12, 4), (7, 11)):
                self.assertAlmostEqual(
                    matrix.W[m, n], transition_probability(m, n, 0.3, variant), places=12
                )

    def test_n_max_limit(self):
        """Test a DomainError above the supported quantum numbers."""
        with pytest.raises(DomainError):
            transition_matrix(0.1, 121)

    def test_strict_truncation(self):
        """Test a TruncationDeficitError for strong reflection and small n_max."""
        with pytest.raises(TruncationDeficitError):
            transition_matrix(0.9, 4, strict=True)
        self.assertTrue(transition_matrix(0.9, 4).truncation_flag)

    def test_literal_variant(self):
        """Test that the literal argument departs from the frozen one only for rho > 0."""
        self.assertEqual(literal_discrepancy(0.0, 6), 0.0)
        self.assertGreater(literal_discrepancy(0.2, 6), 1e-3)

    def test_summaries(self):
        """Test the summary table of several matrices."""
        frame = transition_summaries([transition_matrix(0.1, 4), transition_matrix(0.2, 4)])

        self.assertEqual(list(frame["rho"]), [0.1, 0.2])
        self.assertIn("max_column_deficit", frame.columns)
        self.assertNotIn("mean_gain", frame.columns)
        columns = list(transition_matrix(0.1, 2).to_frame().columns)
        self.assertEqual(columns, ["m", "n0", "n1", "n2"])


class TestWavefunction(TestCase):
    """Test cases for exact oscillator states built from xi."""

    def test_ground_state_of_constant_profile(self):
        """Test |psi_0|^2 = exp(-z^2) / sqrt(pi) when xi = exp(i tau)."""
        sol = solve_xi(constant_profile(1.0, span=5.0, samples=501))
        z = np.linspace(-2.0, 2.0, 9)
        psi = wavefunction(0, sol, 0.0, z)

        expected = np.exp(-(z**2)) / math.sqrt(math.pi)
        np.testing.assert_allclose(np.abs(psi) ** 2, expected, rtol=1e-6)

    def test_single_sample(self):
        """Test that a sample carries its coordinates and the pointwise value."""
        sol = solve_xi(constant_profile(1.0, span=5.0, samples=501))
        sample = wave_sample(1, sol, 0.5, 0.3)
        psi = wavefunction(1, sol, 0.5, np.array([0.3]))[0]

        self.assertEqual((sample.n, sample.tau, sample.z), (1, 0.5, 0.3))
        self.assertAlmostEqual(abs(sample.psi - complex(psi)), 0.0)

    def test_orthonormal_after_switch(self):
        """Test orthonormality of exact states past a tanh switch."""
        sol = solve_xi(tanh_profile(1.0, 2.0, width=1.0))

        self.assertAlmostEqual(abs(wave_overlap(0, 0, sol, 5.0)), 1.0, places=5)
        self.assertAlmostEqual(abs(wave_overlap(1, 1, sol, 5.0)), 1.0, places=5)
        self.assertAlmostEqual(abs(wave_overlap(0, 2, sol, 5.0)), 0.0, places=5)

    def test_caustic(self):
        """Test a CausticError where xi vanishes."""
        sol = OscillatorSolution(
            tau=np.array([0.0, 1.0, 2.0]),
            xi=np.array([1.0, 0.0, 1.0], dtype=complex),
            xi_dot=np.array([1j, 1j, 1j]),
            omega_in=1.0,
            omega_out=1.0,
        )

        with pytest.raises(CausticError):
            wavefunction(0, sol, 1.0, np.array([0.0]))

    def test_outside_range(self):
        """Test a DomainError outside the solution range or for negative n."""
        sol = solve_xi(constant_profile(1.0, span=2.0, samples=201))

        with pytest.raises(DomainError):
            wavefunction(0, sol, 3.0, np.array([0.0]))
        with pytest.raises(DomainError):
            wavefunction(-1, sol, 0.0, np.array([0.0]))


@pytest.mark.slow
class TestNumberStateOracle(TestCase):
    """Test cases comparing closed-form probabilities with number-state evolution."""

    def test_sudden_jump_matches_frozen_matrix(self):
        """Test agreement of the oracle with W at rho = 1/9."""
        profile = sudden_jump_profile(1.0, 2.0, span=2.0, samples=201)
        oracle = number_state_oracle(profile, n_max=4)
        matrix = transition_matrix(sudden_jump_reflection(1.0, 2.0), 4)

        self.assertLess(oracle_agreement(matrix, oracle), 1e-6)
        self.assertLess(parity_leak(oracle), 1e-12)
        np.testing.assert_allclose(oracle.column_sums[:5], 1.0, atol=1e-6)
