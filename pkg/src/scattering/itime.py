#!/usr/bin/env python
"""
Internal time, the ray-adapted metric and the oscillator frequency profile.

A trajectory is projected onto the extremal ray: each sample gets the arclength
sigma of its nearest ray point and its signed normal offset. The internal time is
the action-like integral tau(sigma) = (1/E_k) int_0^sigma P0 sqrt(gamma0) dsigma',
with sqrt(gamma0) = |1 + lambda / rho1| evaluated on the ray. It stops growing and
turns back wherever the projected motion reverses along the ray.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.interpolate import CubicSpline, PchipInterpolator

from src.scattering.geodesic import Trajectory
from src.scattering.ray import ExtremalRay
from src.scattering.system import HBAR, MomentumField
from src.utils.errors import (
    AsymptoteError,
    DomainError,
    FrameBreakdownError,
    ProjectionError,
    TurningPointError,
)

logger = logging.getLogger(__name__)

GAUSS_NODES = 5
# embedded check rule for the quadrature error estimate
GAUSS_CHECK_NODES = 7
QUADRATURE_TOL = 1e-10
TAIL_FRACTION = 0.1
OMEGA_VARIANTS = ("literal", "flipped")


class Extremum(NamedTuple):
    """A reversal of the projected motion, where tau has a local extremum."""

    s: float
    tau: float
    kind: str
    left: float
    right: float


@dataclass(frozen=True, eq=False)
class InternalTimeSeries:
    """Internal time along a trajectory."""

    s: np.ndarray
    tau: np.ndarray
    dtau_ds: np.ndarray
    sigma: np.ndarray
    offset: np.ndarray
    extrema: List[Extremum]
    energy: float

    @property
    def monotone(self) -> bool:
        return not self.extrema

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"s": self.s, "tau": self.tau, "dtau_ds": self.dtau_ds})

    def extrema_records(self) -> List[Dict[str, float]]:
        return [e._asdict() for e in self.extrema]


@dataclass(frozen=True, eq=False)
class FrequencyProfile:
    """
    Squared oscillator frequency along a path parameter u.

    For a ray profile u is tau itself. For a trajectory profile u is the affine
    parameter s and ``dtau_du`` may change sign, which folds tau. Equal consecutive
    u values mark a breakpoint where omega_sq jumps.
    """

    tau: np.ndarray
    omega_sq: np.ndarray
    omega_in: float
    omega_out: float
    u: Optional[np.ndarray] = None
    dtau_du: Optional[np.ndarray] = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def parameter(self) -> np.ndarray:
        return self.tau if self.u is None else self.u

    @property
    def rate(self) -> np.ndarray:
        return np.ones_like(self.tau) if self.dtau_du is None else self.dtau_du

    def shifted(self, offset: float) -> "FrequencyProfile":
        """Same profile translated by ``offset`` in tau."""
        u = None if self.u is None else self.u + offset
        return FrequencyProfile(
            self.tau + offset,
            self.omega_sq,
            self.omega_in,
            self.omega_out,
            u,
            self.dtau_du,
            self.name,
        )

    def reversed(self) -> "FrequencyProfile":
        """Time-reversed profile; the asymptotic frequencies swap."""
        tau = -self.tau[::-1]
        u = None if self.u is None else -self.u[::-1]
        rate = None if self.dtau_du is None else self.dtau_du[::-1]
        return FrequencyProfile(
            tau, self.omega_sq[::-1], self.omega_out, self.omega_in, u, rate, self.name
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"tau": self.tau, "omega_sq": self.omega_sq})


def z_coordinate(x2: float, p: float, energy: float) -> float:
    """
    Scaled transverse coordinate z = p x2 / sqrt(hbar E_k).

    Raises:
        DomainError: If p or E_k is not positive
    """
    if not p > 0:
        raise DomainError(f"momentum must be positive, got {p}")
    if not energy > 0:
        raise DomainError(f"collision energy must be positive, got {energy}")
    return p * x2 / math.sqrt(HBAR * energy)


def x2_from_z(z: float, p: float, energy: float) -> float:
    """Inverse of z_coordinate."""
    return z * math.sqrt(HBAR * energy) / p


def gamma_metric(ray: ExtremalRay, s_index: int, x2: float) -> Tuple[float, float]:
    """
    Ray-adapted metric components (gamma11, gamma22) at a ray sample.

    gamma11 = (1 + lambda/rho1)^2 and gamma22 = (1 + x2/rho2)^2.

    Raises:
        FrameBreakdownError: If either frame factor is not positive
    """
    return _gamma(
        float(ray.lam[s_index]), float(ray.rho1_inv[s_index]), float(ray.rho2_inv[s_index]), x2
    )


def gamma_from_frame(frame: pd.DataFrame, s_index: int, x2: float) -> Tuple[float, float]:
    """gamma_metric recomputed from an exported ray table."""
    row = frame.iloc[s_index]
    return _gamma(float(row["lambda"]), float(row["rho1_inv"]), float(row["rho2_inv"]), x2)


def _gamma(lam: float, rho1_inv: float, rho2_inv: float, x2: float) -> Tuple[float, float]:
    f1 = 1.0 + lam * rho1_inv
    f2 = 1.0 + x2 * rho2_inv
    if not (f1 > 0 and f2 > 0):
        raise FrameBreakdownError(
            f"ray frame breaks down: 1 + lambda/rho1 = {f1:.4g}, 1 + x2/rho2 = {f2:.4g}"
        )
    return f1 * f1, f2 * f2


def _segment_integrals(rate: CubicSpline, sigma: np.ndarray, order: int) -> np.ndarray:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    left, right = sigma[:-1], sigma[1:]
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    points = mid[:, None] + half[:, None] * nodes[None, :]
    return half * (rate(points) @ weights)


class TauMap:
    """
    tau(sigma) along the ray by cumulative Gauss-Legendre quadrature per segment.

    Each segment is also integrated with a 7-node rule; the largest difference of
    the cumulative tau between the two rules is kept in meta["quadrature_error"] and
    logged as a warning above QUADRATURE_TOL. meta["resolution_error"] compares with
    the same quadrature on every other ray sample.
    """

    def __init__(self, ray: ExtremalRay, energy: float):
        if not energy > 0:
            raise DomainError(f"collision energy must be positive, got {energy}")
        p = ray.momentum
        if np.any(~np.isfinite(p)):
            bad = int(np.argmax(~np.isfinite(p)))
            raise TurningPointError(
                f"ray is classically forbidden at s={ray.arclength[bad]:.4g} for E={ray.energy}"
            )
        self.ray = ray
        self.energy = energy
        self.integrand = p * np.abs(1.0 + ray.lam * ray.rho1_inv)
        self._rate = CubicSpline(ray.arclength, self.integrand)

        segments = _segment_integrals(self._rate, ray.arclength, GAUSS_NODES)
        check = _segment_integrals(self._rate, ray.arclength, GAUSS_CHECK_NODES)
        cumulative = np.concatenate([[0.0], np.cumsum(segments)]) / energy
        error = float(np.max(np.abs(np.cumsum(segments - check)))) / energy if len(check) else 0.0
        self.meta = {
            "rule": "gauss-legendre",
            "nodes": GAUSS_NODES,
            "check_nodes": GAUSS_CHECK_NODES,
            "quadrature_error": error,
            "resolution_error": self._resolution_error(cumulative),
        }
        if error > QUADRATURE_TOL:
            logger.warning(
                f"Internal-time quadrature error {error:.3g} exceeds {QUADRATURE_TOL:.0e} "
                f"over {len(segments)} segments"
            )
        zero = float(np.interp(0.0, ray.arclength, cumulative))
        self.sigma = ray.arclength
        self.tau = cumulative - zero
        self._tau = PchipInterpolator(self.sigma, self.tau)

    def _resolution_error(self, cumulative: np.ndarray) -> float:
        count = len(self.integrand)
        if count < 5:
            return float("nan")
        index = np.arange(0, count, 2)
        if index[-1] != count - 1:
            index = np.append(index, count - 1)
        sigma = self.ray.arclength[index]
        coarse = CubicSpline(sigma, self.integrand[index])
        segments = _segment_integrals(coarse, sigma, GAUSS_NODES)
        tau = np.concatenate([[0.0], np.cumsum(segments)]) / self.energy
        error = float(np.max(np.abs(tau - cumulative[index])))
        logger.debug(f"Internal-time resolution error {error:.3g} at half the ray samples")
        return error

    def __call__(self, sigma: np.ndarray) -> np.ndarray:
        return self._tau(sigma)

    def derivative(self, sigma: np.ndarray) -> np.ndarray:
        """dtau/dsigma."""
        return self._rate(sigma) / self.energy


def project(ray: ExtremalRay, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Nearest-point projection onto the ray polyline.

    Args:
        ray: The extremal ray
        points: Array of shape (n, 2)

    Returns:
        (sigma, offset, segment): arclength of the foot point, signed distance along
        the ray normal and index of the segment start
    """
    pts = np.atleast_2d(points)
    _, nearest = ray.tree.query(pts)
    last = ray.size - 1
    best_sigma = np.empty(len(pts))
    best_offset = np.empty(len(pts))
    best_dist = np.full(len(pts), np.inf)
    best_segment = np.zeros(len(pts), dtype=int)
    for shift in (-1, 0):
        start = np.clip(nearest + shift, 0, last - 1)
        a = ray.points[start]
        b = ray.points[start + 1]
        ab = b - a
        frac = np.clip(np.sum((pts - a) * ab, axis=1) / np.sum(ab * ab, axis=1), 0.0, 1.0)
        foot = a + frac[:, None] * ab
        diff = pts - foot
        dist = np.linalg.norm(diff, axis=1)
        sigma = ray.arclength[start] + frac * (ray.arclength[start + 1] - ray.arclength[start])
        normal = (1.0 - frac)[:, None] * ray.normals[start] + frac[:, None] * ray.normals[start + 1]
        offset = np.sum(diff * normal, axis=1) / np.linalg.norm(normal, axis=1)
        better = dist < best_dist
        best_dist = np.where(better, dist, best_dist)
        best_sigma = np.where(better, sigma, best_sigma)
        best_offset = np.where(better, offset, best_offset)
        best_segment = np.where(better, start, best_segment)
    return best_sigma, best_offset, best_segment


def _locate_extrema(s: np.ndarray, tau: np.ndarray, rate: np.ndarray) -> List[Extremum]:
    extrema = []
    signs = np.sign(rate)
    for i in np.nonzero(signs[:-1] * signs[1:] < 0)[0]:
        left, right = float(rate[i]), float(rate[i + 1])
        frac = left / (left - right)
        s_star = float(s[i] + frac * (s[i + 1] - s[i]))
        tau_star = float(max(tau[i], tau[i + 1]) if left > 0 else min(tau[i], tau[i + 1]))
        extrema.append(Extremum(s_star, tau_star, "max" if left > 0 else "min", left, right))
    return extrema


def internal_time(
    traj: Trajectory,
    ray: ExtremalRay,
    energy: float,
    tau_map: Optional[TauMap] = None,
    tube_radius: Optional[float] = None,
) -> InternalTimeSeries:
    """
    Internal time tau(s) along a trajectory.

    Args:
        traj: The trajectory
        ray: The extremal ray the trajectory is projected onto
        energy: Collision energy E_k (eV)
        tau_map: Precomputed tau(sigma) for this ray and energy
        tube_radius: Largest allowed distance from the ray; defaults to the ray's

    Returns:
        InternalTimeSeries: tau, dtau/ds and the reversals of the projected motion

    Raises:
        ProjectionError: If a sample lies outside the tube around the ray
        FrameBreakdownError: If the projection becomes singular (1 - kappa d <= 0)
    """
    tau_map = tau_map or TauMap(ray, energy)
    radius = ray.tube_radius if tube_radius is None else tube_radius
    sigma, offset, segment = project(ray, traj.x)

    outside = np.abs(offset) > radius
    if np.any(outside):
        k = int(np.argmax(outside))
        raise ProjectionError(
            f"trajectory sample at s={traj.s[k]:.6g} is {abs(offset[k]):.4g} from the ray "
            f"(tube radius {radius:.4g})"
        )

    frac = (sigma - ray.arclength[segment]) / ray.spacing
    tangent = (1.0 - frac)[:, None] * ray.tangents[segment] + frac[:, None] * ray.tangents[
        segment + 1
    ]
    tangent /= np.linalg.norm(tangent, axis=1)[:, None]
    kappa = (1.0 - frac) * ray.curvature[segment] + frac * ray.curvature[segment + 1]
    stretch = 1.0 - kappa * offset
    if np.any(stretch <= 0):
        k = int(np.argmax(stretch <= 0))
        raise FrameBreakdownError(
            f"projection singular at s={traj.s[k]:.6g} (1 - kappa d = {stretch[k]:.3g})"
        )

    dsigma_ds = np.sum(traj.v * tangent, axis=1) / stretch
    tau = tau_map(sigma)
    dtau_ds = tau_map.derivative(sigma) * dsigma_ds
    extrema = _locate_extrema(traj.s, tau, dtau_ds)
    logger.debug(f"Internal time: span {tau[0]:.4g}..{tau[-1]:.4g}, {len(extrema)} extrema")
    return InternalTimeSeries(
        s=traj.s.copy(),
        tau=tau,
        dtau_ds=dtau_ds,
        sigma=sigma,
        offset=offset,
        extrema=extrema,
        energy=float(energy),
    )


def extrema_statistics(series: InternalTimeSeries) -> Dict[str, object]:
    """
    Summary of the oscillation of tau.

    Returns:
        Dict with the extremum count, the tau spans between consecutive extrema and
        the derivative jump magnitudes |right - left| at each extremum
    """
    taus = np.array([e.tau for e in series.extrema])
    jumps = [abs(e.right - e.left) for e in series.extrema]
    return {
        "count": len(series.extrema),
        "tau_spans": np.abs(np.diff(taus)).tolist() if len(taus) > 1 else [],
        "jumps": jumps,
        "max_jump": max(jumps) if jumps else 0.0,
    }


def _tail_mean(values: np.ndarray, tol: float, side: str) -> float:
    mean = float(np.mean(values))
    spread = float(np.std(values))
    if mean < 0:
        raise AsymptoteError(f"{side} asymptote has negative Omega^2 = {mean:.6g}")
    if spread > tol * max(abs(mean), 1e-300) and spread > 1e-300:
        raise AsymptoteError(
            f"{side} asymptote not settled: relative spread {spread / max(abs(mean), 1e-300):.3g} "
            f"exceeds {tol:.3g}"
        )
    return mean


def omega_profile(
    ray: ExtremalRay,
    momentum_field: MomentumField,
    energy: float,
    variant: str = "literal",
    tail_tol: float = 1e-3,
    tau_map: Optional[TauMap] = None,
) -> FrequencyProfile:
    """
    Oscillator frequency profile Omega^2(tau) along the ray.

    Omega^2 = -(E_k/p)^2 [1/rho2^2 + sum_k (p;kk/p + (p;k/p)^2)] with directional
    derivatives of p = P0 along the ray tangent (k = 1) and normal (k = 2). The
    ``flipped`` variant reverses the overall sign.

    Args:
        ray: The extremal ray
        momentum_field: P0^2 field; its energy fixes p
        energy: Collision energy E_k (eV)
        variant: "literal" or "flipped"
        tail_tol: Largest relative spread of Omega^2 over each asymptotic tail
        tau_map: Precomputed tau(sigma) for this ray

    Returns:
        FrequencyProfile: Omega^2 sampled at the ray points, parameterized by tau

    Raises:
        TurningPointError: If p <= 0 somewhere on the ray
        AsymptoteError: If a tail does not settle
    """
    if variant not in OMEGA_VARIANTS:
        raise ValueError(f"unknown Omega^2 variant '{variant}'")
    mu0 = momentum_field.mu0
    p_sq = 2.0 * mu0 * (momentum_field.energy - ray.potential)
    if np.any(p_sq <= 0):
        bad = int(np.argmax(p_sq <= 0))
        raise TurningPointError(f"p^2 <= 0 on the ray at s={ray.arclength[bad]:.4g}")
    p = np.sqrt(p_sq)
    p1 = -mu0 * ray.grad_t / p
    p2 = -mu0 * ray.grad_n / p
    p11 = -mu0 * ray.hess_tt / p - mu0 * mu0 * ray.grad_t**2 / p**3
    p22 = -mu0 * ray.hess_nn / p - mu0 * mu0 * ray.grad_n**2 / p**3
    rho2_inv = p2 / p
    brace = rho2_inv**2 + p11 / p + p22 / p + (p1 / p) ** 2 + (p2 / p) ** 2
    omega_sq = -((energy / p) ** 2) * brace
    if variant == "flipped":
        omega_sq = -omega_sq

    tau_map = tau_map or TauMap(ray, energy)
    tau = tau_map(ray.arclength)
    tail = max(int(TAIL_FRACTION * len(tau)), 2)
    omega_in_sq = _tail_mean(omega_sq[:tail], tail_tol, "in")
    omega_out_sq = _tail_mean(omega_sq[-tail:], tail_tol, "out")
    profile = FrequencyProfile(
        tau=tau,
        omega_sq=omega_sq,
        omega_in=math.sqrt(omega_in_sq),
        omega_out=math.sqrt(omega_out_sq),
        name=f"ray-{variant}",
        meta={"sigma": ray.arclength},
    )
    logger.info(
        f"Frequency profile ({variant}): Omega_in={profile.omega_in:.6g}, "
        f"Omega_out={profile.omega_out:.6g}"
    )
    return profile


def trajectory_profile(series: InternalTimeSeries, profile: FrequencyProfile) -> FrequencyProfile:
    """
    Frequency profile seen along a trajectory, parameterized by its affine parameter.

    Omega^2 is read off the ray profile at each sample's projected arclength; tau may
    fold where the projected motion reverses.
    """
    sigma_axis = profile.meta.get("sigma")
    if sigma_axis is None:
        raise DomainError("ray profile carries no arclength axis")
    omega_sq = np.interp(series.sigma, sigma_axis, profile.omega_sq)
    # A reflected trajectory leaves through the (in) channel
    final = profile.omega_out if series.sigma[-1] > 0 else profile.omega_in
    return FrequencyProfile(
        tau=series.tau,
        omega_sq=omega_sq,
        omega_in=profile.omega_in,
        omega_out=final,
        u=series.s,
        dtau_du=series.dtau_ds,
        name="trajectory",
    )
