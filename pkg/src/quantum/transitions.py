#!/usr/bin/env python
"""
Vibrational transition probabilities of the parametric oscillator.

W_mn = (n<! / n>!) sqrt(1 - rho) |P^{(n> - n<)/2}_{(n> + n<)/2}(x)|^2 for m = n (mod 2)
and zero otherwise. The frozen convention uses x = sqrt(1 - rho), under which the
matrix is the identity at rho = 0 and agrees with the number-state evolution; the
``literal`` variant evaluates the Legendre function at x = 1 - rho.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional

import numpy as np
import pandas as pd
from numpy.polynomial.hermite import hermgauss
from scipy.integrate import cumulative_trapezoid, solve_ivp
from scipy.linalg import expm
from scipy.special import eval_hermite

from src.quantum.legendre import legendre_p, legendre_table
from src.quantum.oscillator import OscillatorSolution, profile_segments
from src.scattering.itime import FrequencyProfile
from src.utils.errors import (
    CausticError,
    DomainError,
    IntegrationError,
    OracleConvergenceError,
    TruncationDeficitError,
)

logger = logging.getLogger(__name__)

LEGENDRE_VARIANTS = ("frozen", "literal")
MAX_QUANTUM_NUMBER = 120
# spread of m, in standard deviations, a column must fit below n_max to count as resolved
HEADROOM_SIGMAS = 4.0


def _check_rho(rho: float) -> None:
    if not 0.0 <= rho < 1.0:
        raise DomainError(f"rho must lie in [0, 1), got {rho}")


def _legendre_argument(rho: float, variant: str) -> float:
    if variant == "frozen":
        return math.sqrt(1.0 - rho)
    if variant == "literal":
        return 1.0 - rho
    raise DomainError(f"unknown Legendre variant '{variant}', expected one of {LEGENDRE_VARIANTS}")


def transition_probability(m: int, n: int, rho: float, variant: str = "frozen") -> float:
    """
    Probability of the n -> m vibrational transition.

    Args:
        m: Final quantum number
        n: Initial quantum number
        rho: Reflection parameter in [0, 1)
        variant: "frozen" or "literal" Legendre argument

    Returns:
        float: W_mn

    Raises:
        DomainError: For rho outside [0, 1) or invalid quantum numbers
    """
    _check_rho(rho)
    if m < 0 or n < 0:
        raise DomainError(f"quantum numbers must be non-negative, got ({m}, {n})")
    if max(m, n) > MAX_QUANTUM_NUMBER:
        raise DomainError(f"quantum numbers above {MAX_QUANTUM_NUMBER} are not supported")
    x = _legendre_argument(rho, variant)
    if (m - n) % 2:
        return 0.0
    low, high = min(m, n), max(m, n)
    ratio = math.exp(math.lgamma(low + 1) - math.lgamma(high + 1))
    p = legendre_p((high + low) // 2, (high - low) // 2, x)
    return ratio * math.sqrt(1.0 - rho) * p * p


def resolved_columns(rho: float, n_max: int, sigmas: float = HEADROOM_SIGMAS) -> int:
    """
    Number of leading columns whose final-state distribution fits inside the grid.

    Starting from n, the final quantum number has mean n + (2n + 1) |beta|^2 and
    variance 2 |alpha|^2 |beta|^2 (n^2 + n + 1), with |beta|^2 = rho / (1 - rho) and
    |alpha|^2 = 1 / (1 - rho). Column n is resolved when the mean plus ``sigmas``
    standard deviations stays at or below n_max. Column 0 always counts.
    """
    _check_rho(rho)
    beta_sq = rho / (1.0 - rho)
    alpha_sq = 1.0 / (1.0 - rho)
    count = 0
    for n in range(n_max + 1):
        mean = n + (2 * n + 1) * beta_sq
        spread = math.sqrt(2.0 * alpha_sq * beta_sq * (n * n + n + 1))
        if mean + sigmas * spread > n_max:
            break
        count += 1
    return max(count, 1)


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """W[m, n] for 0 <= m, n <= n_max."""

    n_max: int
    rho: float
    W: np.ndarray
    variant: str = "frozen"
    deficit_bound: float = 1e-3
    meta: dict = field(default_factory=dict)

    @property
    def column_sums(self) -> np.ndarray:
        return self.W.sum(axis=0)

    @property
    def column_deficits(self) -> np.ndarray:
        return 1.0 - self.column_sums

    @property
    def resolved(self) -> int:
        return resolved_columns(self.rho, self.n_max)

    @property
    def epsilon_trunc(self) -> float:
        """Largest probability deficit over the resolved columns (see resolved_columns)."""
        return float(np.max(self.column_deficits[: self.resolved]))

    @property
    def truncation_flag(self) -> bool:
        return self.epsilon_trunc > self.deficit_bound

    def mean_gain(self) -> np.ndarray:
        """<m> - n per column over the retained states."""
        m = np.arange(self.n_max + 1)
        sums = self.column_sums
        return (m @ self.W) / np.where(sums > 0, sums, 1.0) - m

    def summary(self) -> dict:
        return {
            "rho": self.rho,
            "n_max": self.n_max,
            "variant": self.variant,
            "max_column_deficit": self.epsilon_trunc,
            "resolved_columns": self.resolved,
            "truncation_flag": self.truncation_flag,
            "mean_gain": self.mean_gain().tolist(),
        }

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.W, columns=[f"n{j}" for j in range(self.n_max + 1)])
        frame.insert(0, "m", np.arange(self.n_max + 1))
        return frame


def transition_matrix(
    rho: float,
    n_max: int,
    variant: str = "frozen",
    deficit_bound: float = 1e-3,
    strict: bool = False,
) -> TransitionMatrix:
    """
    Full (n_max + 1) x (n_max + 1) grid of transition probabilities.

    Args:
        rho: Reflection parameter in [0, 1)
        n_max: Truncation order
        variant: Legendre argument convention
        deficit_bound: Column deficit above which truncation is flagged
        strict: Raise instead of warning when the bound is exceeded

    Returns:
        TransitionMatrix: The symmetric probability grid

    Raises:
        DomainError: For invalid rho or n_max
        TruncationDeficitError: If strict and the deficit exceeds the bound
    """
    _check_rho(rho)
    if n_max < 0:
        raise DomainError(f"n_max must be non-negative, got {n_max}")
    if n_max > MAX_QUANTUM_NUMBER:
        raise DomainError(f"quantum numbers above {MAX_QUANTUM_NUMBER} are not supported")
    table = legendre_table(n_max, _legendre_argument(rho, variant))
    scale = math.sqrt(1.0 - rho)
    W = np.zeros((n_max + 1, n_max + 1))
    for n in range(n_max + 1):
        for m in range(n, n_max + 1, 2):
            ratio = math.exp(math.lgamma(n + 1) - math.lgamma(m + 1))
            p = table[(m + n) // 2, (m - n) // 2]
            W[m, n] = W[n, m] = ratio * scale * p * p
    matrix = TransitionMatrix(n_max, rho, W, variant, deficit_bound)
    if matrix.truncation_flag:
        message = (
            f"Column deficit {matrix.epsilon_trunc:.3g} exceeds {deficit_bound:.3g} "
            f"for rho = {rho}, n_max = {n_max}"
        )
        if strict:
            raise TruncationDeficitError(message)
        logger.warning(message)
    return matrix


def literal_discrepancy(rho: float, n_max: int) -> float:
    """Largest |W_frozen - W_literal| over the grid."""
    frozen = transition_matrix(rho, n_max, "frozen", deficit_bound=1.0)
    literal = transition_matrix(rho, n_max, "literal", deficit_bound=1.0)
    return float(np.max(np.abs(frozen.W - literal.W)))


class WaveSample(NamedTuple):
    n: int
    tau: float
    z: float
    psi: complex


def _monotone(sol: OscillatorSolution) -> None:
    if np.any(np.diff(sol.tau) < 0):
        raise DomainError("wave function needs a solution monotone in tau")


def _log_rate(momentum: Optional[Callable[[float], float]], tau: float) -> float:
    if momentum is None:
        return 0.0
    h = 1e-6 * max(1.0, abs(tau))
    return (math.log(momentum(tau + h)) - math.log(momentum(tau - h))) / (2.0 * h)


def wavefunction(
    n: int,
    sol: OscillatorSolution,
    tau: float,
    z: np.ndarray,
    momentum: Optional[Callable[[float], float]] = None,
    caustic_tol: float = 1e-12,
) -> np.ndarray:
    """
    Exact state psi_n(tau, z) of the parametric oscillator built from xi.

    psi_n = [sqrt(Omega_in/pi) / (2^n n! |xi|)]^{1/2} exp(-i (n + 1/2) Omega_in int dtau/|xi|^2)
            exp(i/2 (xi'/xi) z^2 - i/2 (p'/p) z^2) H_n(sqrt(Omega_in) z / |xi|)

    Args:
        n: Vibrational quantum number
        sol: Oscillator solution monotone in tau
        tau: Internal time inside the solution range
        z: Scaled transverse coordinate(s)
        momentum: p(tau) along the ray; its log-derivative enters the phase only
        caustic_tol: |xi| below which the state is undefined

    Returns:
        np.ndarray: Complex amplitudes at z

    Raises:
        DomainError: For negative n, tau outside the solution or a folded solution
        CausticError: If |xi| vanishes at tau
    """
    if n < 0:
        raise DomainError(f"quantum number must be non-negative, got {n}")
    _monotone(sol)
    if not sol.tau[0] <= tau <= sol.tau[-1]:
        raise DomainError(f"tau = {tau} outside the solution range")

    xi = complex(np.interp(tau, sol.tau, sol.xi.real), np.interp(tau, sol.tau, sol.xi.imag))
    xi_dot = complex(
        np.interp(tau, sol.tau, sol.xi_dot.real), np.interp(tau, sol.tau, sol.xi_dot.imag)
    )
    modulus = abs(xi)
    if modulus < caustic_tol:
        raise CausticError(f"|xi| = {modulus:.3g} at tau = {tau}")

    phase_integral = cumulative_trapezoid(1.0 / np.abs(sol.xi) ** 2, sol.tau, initial=0.0)
    angle = (n + 0.5) * sol.omega_in * float(np.interp(tau, sol.tau, phase_integral))
    norm = math.sqrt(
        math.sqrt(sol.omega_in / math.pi)
        / (2.0**n * math.exp(math.lgamma(n + 1)) * modulus)
    )
    z = np.asarray(z, dtype=float)
    chirp = 0.5j * (xi_dot / xi - _log_rate(momentum, tau)) * z**2
    hermite = eval_hermite(n, math.sqrt(sol.omega_in) * z / modulus)
    return norm * np.exp(-1j * angle + chirp) * hermite


def wave_sample(
    n: int,
    sol: OscillatorSolution,
    tau: float,
    z: float,
    momentum: Optional[Callable[[float], float]] = None,
) -> WaveSample:
    return WaveSample(n, tau, z, complex(wavefunction(n, sol, tau, np.array([z]), momentum)[0]))


def wave_overlap(
    n1: int,
    n2: int,
    sol: OscillatorSolution,
    tau: float,
    momentum: Optional[Callable[[float], float]] = None,
    nodes: int = 64,
) -> complex:
    """
    <psi_n1 | psi_n2> at fixed tau by Gauss-Hermite quadrature.

    The nodes are scaled to the instantaneous width |xi| / sqrt(Omega_in).
    """
    _monotone(sol)
    y, weights = hermgauss(nodes)
    xi_re = np.interp(tau, sol.tau, sol.xi.real)
    xi_abs = abs(complex(xi_re, np.interp(tau, sol.tau, sol.xi.imag)))
    scale = xi_abs / math.sqrt(sol.omega_in)
    z = scale * y
    left = wavefunction(n1, sol, tau, z, momentum)
    right = wavefunction(n2, sol, tau, z, momentum)
    return complex(np.sum(weights * np.exp(y**2) * np.conj(left) * right) * scale)


@dataclass(frozen=True, eq=False)
class OracleResult:
    """|<m_out| U |n_in>|^2 from the truncated number-state evolution."""

    probabilities: np.ndarray
    column_sums: np.ndarray
    dimension: int
    change: float
    omega_in: float
    omega_out: float

    @property
    def n_max(self) -> int:
        return self.probabilities.shape[0] - 1


def _ladder_squares(dimension: int) -> np.ndarray:
    """Matrix of a^2 in the number basis."""
    lower = np.zeros((dimension, dimension))
    m = np.arange(dimension - 2)
    lower[m, m + 2] = np.sqrt((m + 1.0) * (m + 2.0))
    return lower


def _evolve_number_states(
    profile: FrequencyProfile,
    n_max: int,
    dimension: int,
    rtol: float,
    atol: float,
) -> np.ndarray:
    """Probabilities over all out-basis states for initial states 0..n_max."""
    omega_in, omega_out = profile.omega_in, profile.omega_out
    a2 = _ladder_squares(dimension)
    coupling = a2 + a2.T
    levels = np.arange(dimension)
    columns = n_max + 1

    # Interaction picture w.r.t. (2N+1) with accumulated phase phi
    state = np.zeros(1 + dimension * columns, dtype=complex)
    state[1:] = np.eye(dimension, columns, dtype=complex).ravel()
    for seg in profile_segments(profile):

        def rhs(u: float, y: np.ndarray, seg=seg) -> np.ndarray:
            r = seg.rate(u)
            w = seg.omega_sq(u)
            alpha = (omega_in**2 + w) / (4.0 * omega_in)
            beta = (w - omega_in**2) / (4.0 * omega_in)
            out = np.empty_like(y)
            out[0] = r * alpha
            if beta == 0.0:
                out[1:] = 0.0
                return out
            phase = np.exp(2j * levels * y[0].real)
            amplitudes = y[1:].reshape(dimension, columns)
            mixed = phase[:, None] * (coupling @ (np.conj(phase)[:, None] * amplitudes))
            out[1:] = (-1j * r * beta * mixed).ravel()
            return out

        sol = solve_ivp(
            rhs, (float(seg.u[0]), float(seg.u[-1])), state, method="DOP853", rtol=rtol, atol=atol
        )
        if sol.status == -1:
            raise IntegrationError(f"number-state evolution failed: {sol.message}")
        state = sol.y[:, -1]

    phi = state[0].real
    amplitudes = state[1:].reshape(dimension, columns)
    evolved = np.exp(-1j * phi * (2 * levels + 1))[:, None] * amplitudes
    squeeze = 0.5 * math.log(omega_out / omega_in)
    out_basis = expm(0.5 * squeeze * (a2 - a2.T))
    projected = out_basis.conj().T @ evolved
    return np.abs(projected) ** 2


def number_state_oracle(
    profile: FrequencyProfile,
    n_max: int = 10,
    tol: float = 1e-8,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    dimension: Optional[int] = None,
    max_dimension: int = 512,
) -> OracleResult:
    """
    Brute-force transition probabilities from the quantum parametric oscillator.

    The Hamiltonian in the Omega_in number basis is
    H = (Omega_in^2 + Omega^2)/(4 Omega_in) (2N+1)
      + (Omega^2 - Omega_in^2)/(4 Omega_in) (a^2 + a+^2).
    Final states are projected on the Omega_out number basis. The basis is doubled
    until the retained probabilities change by less than ``tol``.

    Args:
        profile: Frequency profile of finite duration
        n_max: Largest quantum number reported
        tol: Convergence tolerance under basis doubling
        rtol: Relative tolerance of the evolution
        atol: Absolute tolerance of the evolution
        dimension: Starting basis size (default max(4 (n_max+1), n_max + 40))
        max_dimension: Largest basis tried

    Returns:
        OracleResult: Probabilities [m, n] for m, n <= n_max and full-basis column sums

    Raises:
        OracleConvergenceError: If doubling never converges
    """
    if not (profile.omega_in > 0 and profile.omega_out > 0):
        raise DomainError("number-state evolution needs positive asymptotic frequencies")
    size = dimension or max(4 * (n_max + 1), n_max + 40)
    current = _evolve_number_states(profile, n_max, size, rtol, atol)
    while True:
        doubled = 2 * size
        if doubled > max_dimension:
            raise OracleConvergenceError(
                f"number-state basis did not converge up to dimension {max_dimension}"
            )
        refined = _evolve_number_states(profile, n_max, doubled, rtol, atol)
        change = float(np.max(np.abs(refined[: n_max + 1] - current[: n_max + 1])))
        logger.debug(f"Oracle basis {size} -> {doubled}: change {change:.3g}")
        size, current = doubled, refined
        if change < tol:
            break
    return OracleResult(
        probabilities=current[: n_max + 1],
        column_sums=current.sum(axis=0),
        dimension=size,
        change=change,
        omega_in=profile.omega_in,
        omega_out=profile.omega_out,
    )


def oracle_agreement(
    matrix: TransitionMatrix, oracle: OracleResult
) -> float:
    """Largest |W_mn - oracle_mn| over the common grid."""
    k = min(matrix.n_max, oracle.n_max) + 1
    return float(np.max(np.abs(matrix.W[:k, :k] - oracle.probabilities[:k, :k])))


def parity_leak(oracle: OracleResult) -> float:
    """Largest oracle probability between states of opposite parity."""
    m, n = np.indices(oracle.probabilities.shape)
    odd = (m - n) % 2 == 1
    return float(np.max(oracle.probabilities[odd])) if np.any(odd) else 0.0


def transition_summaries(matrices: List[TransitionMatrix]) -> pd.DataFrame:
    """One row of scalar summary fields per matrix."""
    rows = []
    for matrix in matrices:
        row = matrix.summary()
        row.pop("mean_gain")
        rows.append(row)
    return pd.DataFrame(rows)
