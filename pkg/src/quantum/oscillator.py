#!/usr/bin/env python
"""
Classical auxiliary oscillator xi'' + Omega^2(tau) xi = 0 with scattering asymptotics.

xi starts as exp(i Omega_in tau) in the (in) asymptote. Past the profile it is
matched to C1 exp(i Omega_out tau) - C2 exp(-i Omega_out tau); the coefficients are
flux normalized so that |C1|^2 - |C2|^2 = 1 and rho = |C2/C1|^2.

Profiles may be parameterized by a path parameter u with dtau/du changing sign
(folded internal time). The equations are then integrated in u as
dxi/du = tau'(u) eta, deta/du = -tau'(u) Omega^2 xi with eta = dxi/dtau, which stays
regular where tau turns back.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from src.scattering.itime import FrequencyProfile
from src.utils.errors import AsymptoteError, IntegrationError, MatchingError

logger = logging.getLogger(__name__)


class Segment(NamedTuple):
    """Smooth piece of a profile between breakpoints."""

    u: np.ndarray
    omega_sq: Callable[[float], float]
    rate: Callable[[float], float]
    start: int
    stop: int


def _interpolant(u: np.ndarray, values: np.ndarray) -> Callable[[float], float]:
    if np.all(values == values[0]):
        constant = float(values[0])
        return lambda _: constant
    if len(u) >= 4:
        spline = CubicSpline(u, values)
        return lambda x: float(spline(x))
    return lambda x: float(np.interp(x, u, values))


def profile_segments(profile: FrequencyProfile) -> List[Segment]:
    """
    Split a profile at its breakpoints (repeated parameter values).

    Returns:
        List[Segment]: Pieces with interpolants of Omega^2 and dtau/du in u
    """
    u = profile.parameter
    if np.any(np.diff(u) < 0):
        raise ValueError("profile parameter must be non-decreasing")
    rate = profile.rate
    cuts = [0] + [int(i) + 1 for i in np.nonzero(np.diff(u) == 0)[0]] + [len(u)]
    segments = []
    for start, stop in zip(cuts[:-1], cuts[1:]):
        if stop - start < 2:
            continue
        piece = slice(start, stop)
        segments.append(
            Segment(
                u=u[piece],
                omega_sq=_interpolant(u[piece], profile.omega_sq[piece]),
                rate=_interpolant(u[piece], rate[piece]),
                start=start,
                stop=stop,
            )
        )
    return segments


class BogoliubovCoefficients(NamedTuple):
    C1: complex
    C2: complex
    rho: float
    residual: float
    extended: bool


@dataclass(frozen=True, eq=False)
class OscillatorSolution:
    """xi and dxi/dtau at the profile samples, with the matched coefficients."""

    tau: np.ndarray
    xi: np.ndarray
    xi_dot: np.ndarray
    omega_in: float
    omega_out: float
    C1: complex = complex("nan")
    C2: complex = complex("nan")
    rho: float = float("nan")
    u: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def wronskian_drift(self) -> float:
        w = wronskian(self)
        return float(np.max(np.abs(w - w[0])) / abs(w[0]))

    @property
    def normalization_error(self) -> float:
        return abs(abs(self.C1) ** 2 - abs(self.C2) ** 2 - 1.0)

    def summary(self) -> dict:
        return {
            "C1": self.C1,
            "C2": self.C2,
            "rho": self.rho,
            "omega_in": self.omega_in,
            "omega_out": self.omega_out,
            "wronskian_drift": self.wronskian_drift,
            "fit_residual": self.meta.get("fit_residual"),
            "extended": self.meta.get("extended"),
        }


def wronskian(sol: OscillatorSolution) -> np.ndarray:
    """Im(conj(xi) dxi/dtau) per sample; equals Omega_in for the scattering solution."""
    return np.imag(np.conj(sol.xi) * sol.xi_dot)


def _check_asymptotes(profile: FrequencyProfile, tol: float) -> None:
    for side, value, target in (
        ("in", profile.omega_sq[0], profile.omega_in**2),
        ("out", profile.omega_sq[-1], profile.omega_out**2),
    ):
        if abs(value - target) > tol * max(target, 1e-300):
            raise AsymptoteError(
                f"profile does not reach its {side} asymptote: Omega^2 = {value:.8g}, "
                f"expected {target:.8g}"
            )


def solve_xi(
    profile: FrequencyProfile,
    rtol: float = 1e-11,
    atol: float = 1e-12,
    method: str = "DOP853",
    asymptote_tol: float = 1e-3,
    match: bool = True,
    residual_tol: float = 1e-8,
    tail_fraction: float = 0.1,
) -> OscillatorSolution:
    """
    Integrate xi through a frequency profile from its (in) asymptote.

    Args:
        profile: The frequency profile
        rtol: Relative tolerance of the integrator
        atol: Absolute tolerance of the integrator
        method: "RK45" or "DOP853"
        asymptote_tol: Relative mismatch allowed between the profile ends and the
            declared asymptotic frequencies
        match: Also extract the Bogoliubov coefficients
        residual_tol: Tail-fit residual accepted by bogoliubov
        tail_fraction: Fraction of samples used for the tail fit

    Returns:
        OscillatorSolution: xi, dxi/dtau and, when matched, C1, C2 and rho

    Raises:
        AsymptoteError: If Omega_in <= 0 or the profile ends off its asymptotes
        IntegrationError: On step-size underflow
    """
    if not profile.omega_in > 0:
        raise AsymptoteError(f"no oscillatory (in) asymptote: Omega_in = {profile.omega_in}")
    _check_asymptotes(profile, asymptote_tol)

    omega_in = profile.omega_in
    xi0 = complex(np.exp(1j * omega_in * profile.tau[0]))
    state = np.array([xi0.real, xi0.imag, -omega_in * xi0.imag, omega_in * xi0.real])

    n = len(profile.tau)
    out = np.full((n, 4), np.nan)
    out[0] = state
    nfev = 0
    for seg in profile_segments(profile):

        def rhs(u: float, y: np.ndarray, seg: Segment = seg) -> np.ndarray:
            r = seg.rate(u)
            w = seg.omega_sq(u)
            return np.array([r * y[2], r * y[3], -r * w * y[0], -r * w * y[1]])

        sol = solve_ivp(
            rhs,
            (float(seg.u[0]), float(seg.u[-1])),
            state,
            method=method,
            t_eval=seg.u,
            rtol=rtol,
            atol=atol,
        )
        if sol.status == -1:
            raise IntegrationError(f"oscillator integration failed: {sol.message}")
        nfev += sol.nfev
        out[seg.start : seg.stop] = sol.y.T
        state = sol.y[:, -1]
    # Single-sample pieces between repeated breakpoints carry the state through
    for i in range(1, n):
        if np.isnan(out[i, 0]):
            out[i] = out[i - 1]

    xi = out[:, 0] + 1j * out[:, 1]
    xi_dot = out[:, 2] + 1j * out[:, 3]
    solution = OscillatorSolution(
        tau=profile.tau.copy(),
        xi=xi,
        xi_dot=xi_dot,
        omega_in=omega_in,
        omega_out=profile.omega_out,
        u=None if profile.u is None else profile.u.copy(),
        meta={"nfev": nfev},
    )
    logger.debug(f"Oscillator solved with {nfev} evaluations, drift {solution.wronskian_drift:.3g}")
    if not match:
        return solution

    coefficients = bogoliubov(solution, profile.omega_out, residual_tol, tail_fraction)
    meta = dict(solution.meta)
    meta.update({"fit_residual": coefficients.residual, "extended": coefficients.extended})
    return OscillatorSolution(
        tau=solution.tau,
        xi=xi,
        xi_dot=xi_dot,
        omega_in=omega_in,
        omega_out=profile.omega_out,
        C1=coefficients.C1,
        C2=coefficients.C2,
        rho=coefficients.rho,
        u=solution.u,
        meta=meta,
    )


def _fit_tail(
    tau: np.ndarray, xi: np.ndarray, xi_dot: np.ndarray, omega: float
) -> Tuple[complex, complex, float]:
    """Least-squares fit of xi and xi'/(i omega) to a e^{i omega tau} -/+ b e^{-i omega tau}."""
    plus = np.exp(1j * omega * tau)
    minus = np.exp(-1j * omega * tau)
    design = np.vstack([np.column_stack([plus, -minus]), np.column_stack([plus, minus])])
    target = np.concatenate([xi, xi_dot / (1j * omega)])
    coeffs, *_ = np.linalg.lstsq(design, target, rcond=None)
    residual = float(np.linalg.norm(design @ coeffs - target) / np.linalg.norm(target))
    return complex(coeffs[0]), complex(coeffs[1]), residual


def bogoliubov(
    sol: OscillatorSolution,
    omega_out: float,
    residual_tol: float = 1e-8,
    tail_fraction: float = 0.1,
    norm_tol: float = 1e-6,
) -> BogoliubovCoefficients:
    """
    Match the tail of xi to C1 e^{i Omega_out tau} - C2 e^{-i Omega_out tau}.

    The fit runs over the last ``tail_fraction`` of the samples. When its residual
    exceeds ``residual_tol`` the solution is continued past the last sample with
    constant Omega_out^2 and refitted there.

    Args:
        sol: The oscillator solution
        omega_out: Outgoing asymptotic frequency
        residual_tol: Relative fit residual accepted
        tail_fraction: Fraction of samples in the matching window
        norm_tol: Allowed deviation of |C1|^2 - |C2|^2 from 1

    Returns:
        BogoliubovCoefficients: Flux-normalized C1, C2, rho and fit diagnostics

    Raises:
        MatchingError: If the fit fails or the coefficients are unphysical
    """
    if not omega_out > 0:
        raise MatchingError(f"no oscillatory (out) asymptote: Omega_out = {omega_out}")
    count = max(int(tail_fraction * len(sol.tau)), 4)
    tau = sol.tau[-count:]
    a, b, residual = _fit_tail(tau, sol.xi[-count:], sol.xi_dot[-count:], omega_out)
    extended = False
    if residual > residual_tol:
        # Free evolution with Omega_out from the last sample onwards
        t_end = sol.tau[-1]
        xi_end, eta_end = sol.xi[-1], sol.xi_dot[-1]
        period = 2.0 * math.pi / omega_out
        span = t_end + np.linspace(0.0, 4.0 * period, 64) * (1.0 if _forward(sol) else -1.0)
        cos, sin = np.cos(omega_out * (span - t_end)), np.sin(omega_out * (span - t_end))
        ext_xi = xi_end * cos + eta_end / omega_out * sin
        ext_eta = -xi_end * omega_out * sin + eta_end * cos
        a, b, residual = _fit_tail(span, ext_xi, ext_eta, omega_out)
        extended = True
        if residual > residual_tol:
            raise MatchingError(f"tail fit residual {residual:.3g} exceeds {residual_tol:.3g}")

    scale = math.sqrt(omega_out / sol.omega_in)
    c1, c2 = a * scale, b * scale
    norm = abs(c1) ** 2 - abs(c2) ** 2
    if abs(norm - 1.0) > norm_tol or abs(c1) == 0.0:
        raise MatchingError(
            f"unphysical Bogoliubov coefficients: |C1|^2 - |C2|^2 = {norm:.8g}"
        )
    rho = abs(c2) ** 2 / abs(c1) ** 2
    return BogoliubovCoefficients(c1, c2, float(rho), residual, extended)


def _forward(sol: OscillatorSolution) -> bool:
    return bool(len(sol.tau) < 2 or sol.tau[-1] >= sol.tau[-2])
