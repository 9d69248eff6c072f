#!/usr/bin/env python
"""
Saddle search and the rearrangement extremal ray.

The extremal ray is realized as the minimum-energy path: steepest descent in
mass-scaled coordinates from the index-1 saddle into both channels, continued as a
straight line along each channel axis and resampled at uniform arclength. The ray
carries the on-ray potential data needed for the principal curvatures and the de
Broglie length at a fixed total energy.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp, trapezoid
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from src.scattering.geodesic import RESONANCE_FACTOR
from src.scattering.surfaces import PotentialSurface
from src.scattering.system import HBAR, MomentumField
from src.utils.errors import (
    DomainError,
    SaddleConvergenceError,
    TruncationError,
    TurningPointError,
    WrongIndexError,
)

logger = logging.getLogger(__name__)

# pseudo-time horizon of the descent; events end it long before
_DESCENT_PSEUDO_TIME = 1e15

RAY_COLUMNS = ["s", "x1", "x2", "V", "P0", "rho1_inv", "rho2_inv", "lambda"]


@dataclass(frozen=True)
class SaddlePoint:
    """A first-order saddle of the potential surface."""

    location: Tuple[float, float]
    energy: float
    eigenvalues: Tuple[float, float]
    unstable_direction: Tuple[float, float]
    iterations: int = 0

    def as_array(self) -> np.ndarray:
        return np.array(self.location, dtype=float)


def find_saddle(
    surface: PotentialSurface,
    guess: Tuple[float, float],
    max_iter: int = 100,
    tol: float = 1e-10,
    max_step: float = 0.5,
    degenerate_tol: float = 1e-6,
) -> SaddlePoint:
    """
    Locate a first-order saddle by Newton iteration on grad V = 0.

    Args:
        surface: The potential surface
        guess: Starting point (x1, x2) inside the domain
        max_iter: Maximum number of Newton steps
        tol: Gradient norm accepted as stationary
        max_step: Largest Newton step length
        degenerate_tol: Smallest |eigenvalue| treated as non-degenerate

    Returns:
        SaddlePoint: The converged saddle

    Raises:
        DomainError: If the guess lies outside the domain
        SaddleConvergenceError: On a degenerate Hessian, domain exit or no convergence
        WrongIndexError: If the stationary point is a minimum or a maximum
    """
    x = np.array(guess, dtype=float)
    if not surface.domain.contains(x[0], x[1]):
        raise DomainError(f"saddle guess {tuple(x)} outside surface domain")

    for iteration in range(max_iter + 1):
        v, grad, _ = surface.derivatives(x[0], x[1], 2)
        g = np.array(grad)
        h = surface.hessian(x[0], x[1])
        eigenvalues, eigenvectors = np.linalg.eigh(h)
        if np.min(np.abs(eigenvalues)) < degenerate_tol:
            raise SaddleConvergenceError(
                f"Hessian degenerate at ({x[0]:.6g}, {x[1]:.6g}) "
                f"(eigenvalues {eigenvalues[0]:.3g}, {eigenvalues[1]:.3g}); "
                f"no stationary point nearby"
            )

        if np.linalg.norm(g) < tol:
            if eigenvalues[0] * eigenvalues[1] > 0:
                kind = "minimum" if eigenvalues[0] > 0 else "maximum"
                raise WrongIndexError(
                    f"stationary point at ({x[0]:.6g}, {x[1]:.6g}) is a {kind}, not a saddle"
                )
            direction = eigenvectors[:, 0]
            saddle = SaddlePoint(
                location=(float(x[0]), float(x[1])),
                energy=float(v),
                eigenvalues=(float(eigenvalues[0]), float(eigenvalues[1])),
                unstable_direction=(float(direction[0]), float(direction[1])),
                iterations=iteration,
            )
            logger.info(
                f"Saddle at ({x[0]:.6f}, {x[1]:.6f}), V={v:.6f} eV after {iteration} iterations"
            )
            return saddle

        step = -np.linalg.solve(h, g)
        length = np.linalg.norm(step)
        if length > max_step:
            step *= max_step / length
        x = x + step
        if not surface.domain.contains(x[0], x[1]):
            raise SaddleConvergenceError(
                f"Newton iteration left the domain at ({x[0]:.6g}, {x[1]:.6g})"
            )

    raise SaddleConvergenceError(f"no convergence after {max_iter} iterations from {guess}")


class RayCurvature(NamedTuple):
    """Inverse principal curvature radii and de Broglie length at one ray sample."""

    rho1_inv: float
    rho2_inv: float
    lam: float


@dataclass(frozen=True, eq=False)
class ExtremalRay:
    """
    Uniformly resampled extremal ray with its on-ray potential data.

    The arclength s is zero at the saddle, negative on the (in) branch and positive
    on the rearrangement branch. Normals are the tangents rotated counter-clockwise;
    rho2_inv is positive when P0 grows along the normal.
    """

    points: np.ndarray
    arclength: np.ndarray
    tangents: np.ndarray
    normals: np.ndarray
    curvature: np.ndarray
    potential: np.ndarray
    grad_t: np.ndarray
    grad_n: np.ndarray
    hess_tt: np.ndarray
    hess_nn: np.ndarray
    energy: float
    mu0: float
    tube_radius: float
    raw_length: float = 0.0
    saddle: Optional[SaddlePoint] = None
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.arclength)

    @property
    def length(self) -> float:
        return float(self.arclength[-1] - self.arclength[0])

    @cached_property
    def metric_length(self) -> float:
        """Jacobi arclength of the ray, the integral of P0 ds; forbidden stretches add nothing."""
        p0 = np.sqrt(np.clip(self.momentum_sq, 0.0, None))
        return float(trapezoid(p0, self.arclength))

    @property
    def spacing(self) -> float:
        return float(self.arclength[1] - self.arclength[0])

    @cached_property
    def momentum_sq(self) -> np.ndarray:
        return 2.0 * self.mu0 * (self.energy - self.potential)

    @cached_property
    def momentum(self) -> np.ndarray:
        """P0 per sample; NaN where the ray is classically forbidden."""
        p_sq = self.momentum_sq
        return np.where(p_sq > 0, np.sqrt(np.clip(p_sq, 0.0, None)), np.nan)

    @cached_property
    def rho1_inv(self) -> np.ndarray:
        return -self.mu0 * self.grad_t / self.momentum**2

    @cached_property
    def rho2_inv(self) -> np.ndarray:
        return -self.mu0 * self.grad_n / self.momentum**2

    @cached_property
    def lam(self) -> np.ndarray:
        return HBAR / self.momentum

    @cached_property
    def polyline_length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))

    @cached_property
    def tree(self) -> cKDTree:
        return cKDTree(self.points)

    @cached_property
    def spline(self) -> CubicSpline:
        """Cubic interpolant of the points over arclength."""
        return CubicSpline(self.arclength, self.points, axis=0)

    def to_frame(self) -> pd.DataFrame:
        """Ray export table with columns s, x1, x2, V, P0, rho1_inv, rho2_inv, lambda."""
        return pd.DataFrame(
            {
                "s": self.arclength,
                "x1": self.points[:, 0],
                "x2": self.points[:, 1],
                "V": self.potential,
                "P0": self.momentum,
                "rho1_inv": self.rho1_inv,
                "rho2_inv": self.rho2_inv,
                "lambda": self.lam,
            },
            columns=RAY_COLUMNS,
        )


def curvatures(ray: ExtremalRay, momentum_field: MomentumField, s_index: int) -> RayCurvature:
    """
    Principal curvatures and de Broglie length at one ray sample.

    rho_i^-1 = (dP0/dx^i) / P0 with x^1 along the ray tangent and x^2 along the
    normal; lambda = hbar / P0.

    Args:
        ray: The extremal ray
        momentum_field: P0^2 field (its energy may differ from the ray's)
        s_index: Sample index along the ray

    Returns:
        RayCurvature: (rho1_inv, rho2_inv, lam)

    Raises:
        TurningPointError: If P0^2 <= 0 at the sample
    """
    point = ray.points[s_index]
    p_sq = momentum_field.momentum_sq(point)
    if p_sq <= 0.0:
        raise TurningPointError(
            f"P0^2 = {p_sq:.3g} at ray sample {s_index} (s={ray.arclength[s_index]:.4g})"
        )
    grad = np.array(momentum_field.surface.gradient(point[0], point[1]))
    mu0 = momentum_field.mu0
    return RayCurvature(
        rho1_inv=float(-mu0 * grad @ ray.tangents[s_index] / p_sq),
        rho2_inv=float(-mu0 * grad @ ray.normals[s_index] / p_sq),
        lam=HBAR / math.sqrt(p_sq),
    )


def _descend(
    surface: PotentialSurface,
    start: np.ndarray,
    max_length: float,
    spacing: float,
    stall_tol: float,
) -> Tuple[np.ndarray, np.ndarray, str]:
    """
    Steepest descent dx/dt = -grad V from ``start``; returns (sigma, points, stop reason).

    The flow is integrated in pseudo-time with a stiff solver and the arclength sigma
    carried as a third state, so the path stays on the valley floor as the gradient
    fades. Points are resampled on a uniform sigma grid.
    """
    geometry = surface.channel_geometry()
    radius = geometry.asymptotic_radius
    domain = surface.domain

    def rhs(_: float, y: np.ndarray) -> np.ndarray:
        g1, g2 = surface.gradient(y[0], y[1])
        return np.array([-g1, -g2, math.hypot(g1, g2)])

    def jac(_: float, y: np.ndarray) -> np.ndarray:
        _, grad, hess = surface.derivatives(y[0], y[1], 2)
        h = np.array([[hess[0], hess[1]], [hess[1], hess[2]]])
        g = np.array(grad)
        norm = float(np.linalg.norm(g))
        row = h @ g / norm if norm > 0.0 else np.zeros(2)
        return np.array(
            [[-h[0, 0], -h[0, 1], 0.0], [-h[1, 0], -h[1, 1], 0.0], [row[0], row[1], 0.0]]
        )

    def reached_in(_: float, y: np.ndarray) -> float:
        u, d = geometry.channel_coords(y[:2], "in")
        return min(u - radius, geometry.in_dissociation - d)

    def reached_out(_: float, y: np.ndarray) -> float:
        u, d = geometry.channel_coords(y[:2], "out")
        return min(u - radius, geometry.out_dissociation - d)

    def left_domain(_: float, y: np.ndarray) -> float:
        return min(
            y[0] - domain.x1_min, domain.x1_max - y[0], y[1] - domain.x2_min, domain.x2_max - y[1]
        )

    def stalled(_: float, y: np.ndarray) -> float:
        g1, g2 = surface.gradient(y[0], y[1])
        return math.hypot(g1, g2) - stall_tol

    def too_long(_: float, y: np.ndarray) -> float:
        return y[2] - max_length

    events = [reached_in, reached_out, left_domain, stalled, too_long]
    for event, direction in zip(events, (1, 1, -1, -1, 1)):
        event.terminal = True  # type: ignore[attr-defined]
        event.direction = direction  # type: ignore[attr-defined]

    sol = solve_ivp(
        rhs,
        (0.0, _DESCENT_PSEUDO_TIME),
        np.append(start, 0.0),
        method="LSODA",
        jac=jac,
        dense_output=True,
        events=events,
        rtol=1e-10,
        atol=1e-12,
    )
    if sol.status == -1:
        raise TruncationError(f"steepest descent failed: {sol.message}")

    reason = "length"
    for name, times in zip(("in", "out", "domain", "stall", "length"), sol.t_events):
        if len(times):
            reason = name
            break

    # dense samples inside every solver step, then a spline in sigma
    t_fine = np.concatenate(
        [np.linspace(a, b, 8, endpoint=False) for a, b in zip(sol.t[:-1], sol.t[1:])]
        + [sol.t[-1:]]
    )
    states = sol.sol(t_fine)
    states[:, -1] = sol.y[:, -1]
    track = states[2]
    previous = np.concatenate([[-np.inf], np.maximum.accumulate(track)[:-1]])
    keep = track > previous + 1e-12
    track, path = track[keep], states[:2, keep].T

    end = float(track[-1])
    if len(track) < 2:
        sigma, points = np.array([0.0]), path
    else:
        sigma = np.append(np.arange(0.0, end, 0.5 * spacing), end)
        points = CubicSpline(track, path, axis=0)(sigma)
    if reason in ("domain", "length"):
        last = points[-1]
        raise TruncationError(
            f"steepest descent stopped ({reason}) at ({last[0]:.6g}, {last[1]:.6g}) "
            f"after arclength {end:.4g}, region '{geometry.region(last)}', "
            f"before reaching a channel asymptote"
        )
    return sigma, points, reason


def _branch_channel(surface: PotentialSurface, end: np.ndarray, reason: str) -> str:
    if reason in ("in", "out"):
        return reason
    geometry = surface.channel_geometry()
    candidates = []
    for channel in ("in", "out"):
        u, y = geometry.channel_coords(end, channel)
        if u > 0:
            candidates.append((abs(y), channel))
    if not candidates:
        raise TruncationError(
            f"descent stalled at ({end[0]:.6g}, {end[1]:.6g}) outside both channels"
        )
    return min(candidates)[1]


def _extend(
    surface: PotentialSurface, sigma: np.ndarray, points: np.ndarray, channel: str, target: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Continue a branch in a straight line along its channel axis up to u = target."""
    geometry = surface.channel_geometry()
    direction = np.array(geometry.direction(channel))
    u_end, _ = geometry.channel_coords(points[-1], channel)
    remaining = target - u_end
    if remaining <= 0:
        return sigma, points
    step = sigma[1] - sigma[0] if len(sigma) > 1 else 0.01
    extra = np.append(np.arange(step, remaining, step), remaining)
    new_points = points[-1] + np.outer(extra, direction)
    return np.concatenate([sigma, sigma[-1] + extra]), np.vstack([points, new_points])


def _assemble(
    surface: PotentialSurface,
    energy: float,
    nodes: np.ndarray,
    sigma: np.ndarray,
    tube_radius: Optional[float],
    spacing: float,
    saddle: Optional[SaddlePoint],
    raw_length: float,
) -> ExtremalRay:
    """Resample a parameterized curve at uniform arclength and gather on-ray data."""
    spline = CubicSpline(sigma, nodes, axis=0)
    count = max(int(math.ceil((sigma[-1] - sigma[0]) / spacing)), 2)
    s = np.linspace(sigma[0], sigma[-1], count + 1)
    points = spline(s)
    d1 = spline(s, 1)
    d2 = spline(s, 2)
    speed = np.linalg.norm(d1, axis=1)
    tangents = d1 / speed[:, None]
    normals = np.column_stack([-tangents[:, 1], tangents[:, 0]])
    curvature = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed**3

    n = len(s)
    potential = np.empty(n)
    grad_t = np.empty(n)
    grad_n = np.empty(n)
    hess_tt = np.empty(n)
    hess_nn = np.empty(n)
    for k in range(n):
        v, grad, hess = surface.derivatives(points[k, 0], points[k, 1], 2)
        assert grad is not None and hess is not None
        t, nrm = tangents[k], normals[k]
        potential[k] = v
        grad_t[k] = grad[0] * t[0] + grad[1] * t[1]
        grad_n[k] = grad[0] * nrm[0] + grad[1] * nrm[1]
        hess_tt[k] = hess[0] * t[0] * t[0] + 2.0 * hess[1] * t[0] * t[1] + hess[2] * t[1] * t[1]
        hess_nn[k] = (
            hess[0] * nrm[0] * nrm[0] + 2.0 * hess[1] * nrm[0] * nrm[1] + hess[2] * nrm[1] * nrm[1]
        )

    if tube_radius is None:
        widths = [surface.channel_width(channel, energy) for channel in ("in", "out")]
        tube_radius = 0.5 * min(widths)

    return ExtremalRay(
        points=points,
        arclength=s,
        tangents=tangents,
        normals=normals,
        curvature=curvature,
        potential=potential,
        grad_t=grad_t,
        grad_n=grad_n,
        hess_tt=hess_tt,
        hess_nn=hess_nn,
        energy=float(energy),
        mu0=surface.mu0,
        tube_radius=float(tube_radius),
        raw_length=float(raw_length),
        saddle=saddle,
    )


def _check_channels_open(surface: PotentialSurface, energy: float) -> None:
    radius = surface.channel_geometry().asymptotic_radius
    for channel in ("in", "out"):
        floor = surface.channel_floor(channel, radius)
        if energy <= floor:
            raise DomainError(
                f"energy {energy} eV is below the '{channel}' channel floor {floor:.6g} eV"
            )


def extremal_ray(
    surface: PotentialSurface,
    energy: float,
    saddle: SaddlePoint,
    spacing: float = 0.005,
    offset: float = 1e-4,
    stall_tol: float = 1e-6,
    extension: float = 1.0,
    tube_radius: Optional[float] = None,
) -> ExtremalRay:
    """
    Trace the minimum-energy path from a saddle into both channels.

    Args:
        surface: The potential surface
        energy: Total energy E (eV), above both channel floors
        saddle: The index-1 saddle to descend from
        spacing: Arclength between resampled points
        offset: Initial displacement from the saddle along the unstable direction
        stall_tol: Gradient norm (eV per unit length) below which descent switches to
            straight extension along the channel axis
        extension: Distance beyond the asymptotic radius covered by the ray
        tube_radius: Projection tube radius; defaults to half the narrowest channel width

    Returns:
        ExtremalRay: The ray, oriented from the (in) channel to the rearrangement channel

    Raises:
        DomainError: If the energy is below a channel floor
        TruncationError: If a descent branch leaves the domain before an asymptote
    """
    _check_channels_open(surface, energy)
    geometry = surface.channel_geometry()
    domain = surface.domain
    max_length = 4.0 * math.hypot(domain.x1_max - domain.x1_min, domain.x2_max - domain.x2_min)
    target = geometry.asymptotic_radius + extension
    origin = saddle.as_array()
    unstable = np.array(saddle.unstable_direction)

    branches = {}
    for sign in (1.0, -1.0):
        sigma, points, reason = _descend(
            surface, origin + sign * offset * unstable, max_length, spacing, stall_tol
        )
        channel = _branch_channel(surface, points[-1], reason)
        if channel in branches:
            raise TruncationError(f"both descent branches end in the '{channel}' channel")
        raw = float(sigma[-1])
        sigma, points = _extend(surface, sigma, points, channel, target)
        branches[channel] = (sigma, points, raw, reason)
        logger.debug(f"Descent branch to '{channel}' stopped by {reason} after length {raw:.4f}")

    sig_in, pts_in, raw_in, _ = branches["in"]
    sig_out, pts_out, raw_out, _ = branches["out"]
    sigma = np.concatenate([-(offset + sig_in[::-1]), [0.0], offset + sig_out])
    nodes = np.vstack([pts_in[::-1], origin, pts_out])
    keep = np.concatenate([[True], np.diff(sigma) > 1e-12])
    sigma, nodes = sigma[keep], nodes[keep]

    raw_length = float(sigma[-1] - sigma[0])
    ray = _assemble(surface, energy, nodes, sigma, tube_radius, spacing, saddle, raw_length)
    ray.meta.update({"descent_length_in": raw_in, "descent_length_out": raw_out})
    logger.info(
        f"Extremal ray: length {ray.length:.4f} with {ray.size} samples, "
        f"tube radius {ray.tube_radius:.4g}"
    )
    return ray


def straight_ray(
    surface: PotentialSurface,
    energy: float,
    start: Tuple[float, float],
    end: Tuple[float, float],
    spacing: float = 0.005,
    tube_radius: Optional[float] = None,
    origin: Optional[Tuple[float, float]] = None,
) -> ExtremalRay:
    """
    A straight segment used as the reference ray on surfaces without a saddle.

    Args:
        surface: The potential surface
        energy: Total energy E (eV)
        start: First point, in the (in) channel
        end: Last point, in the rearrangement channel
        spacing: Arclength between resampled points
        tube_radius: Projection tube radius; defaults to half the narrowest channel width
        origin: Point where s = 0; defaults to the midpoint

    Returns:
        ExtremalRay: The straight ray
    """
    a = np.array(start, dtype=float)
    b = np.array(end, dtype=float)
    length = float(np.linalg.norm(b - a))
    if length == 0.0:
        raise DomainError("straight ray needs two distinct points")
    zero = 0.5 * length if origin is None else float(np.dot(np.array(origin) - a, b - a) / length)
    count = max(int(math.ceil(length / spacing)), 4)
    frac = np.linspace(0.0, 1.0, count + 1)
    nodes = a + np.outer(frac, b - a)
    sigma = frac * length - zero
    return _assemble(surface, energy, nodes, sigma, tube_radius, spacing, None, length)


def resonance_threshold(ray: ExtremalRay, factor: float = RESONANCE_FACTOR) -> float:
    """Dwell arclength that flags a resonance: ``factor`` direct transits along the ray."""
    return factor * ray.metric_length


def branch_potentials(ray: ExtremalRay) -> List[np.ndarray]:
    """V along each descent branch, ordered outward from s = 0."""
    zero = int(np.searchsorted(ray.arclength, 0.0))
    return [ray.potential[:zero][::-1], ray.potential[zero:]]
