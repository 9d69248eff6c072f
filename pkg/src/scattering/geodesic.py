#!/usr/bin/env python
"""
Geodesic flow on the Jacobi metric g_ik = P0^2 delta_ik and outcome classification.

The affine parameter s is the Jacobi arclength, so a geodesic with unit metric speed
has dx/ds = xdot / (2(E - V)) and ds = 2(E - V) dt along the Newtonian motion. The
production integrator runs the Newtonian equations of motion, which stay regular at
turning points, and reconstructs s by quadrature. ``integrate_direct`` solves the
geodesic equations themselves and serves as an independent cross-check away from the
turning locus.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp

from src.scattering.surfaces import ChannelGeometry, PotentialSurface
from src.scattering.system import MomentumField
from src.utils.errors import (
    ClassificationError,
    DomainError,
    EnergyDriftError,
    IntegrationError,
    TurningPointError,
)

logger = logging.getLogger(__name__)

OUTCOME_LABELS = ("reflect", "rearrange", "dissociate", "trapped", "failed")
REGION_LABELS = {"in": "reflect", "out": "rearrange", "dissociated": "dissociate"}
TRAJECTORY_COLUMNS = ["s", "t", "x1", "x2", "v1", "v2", "V", "P0sq"]
# dwell, in units of a direct transit, above which a pass counts as resonant
RESONANCE_FACTOR = 3.0


@dataclass(frozen=True)
class GeodesicState:
    """Point, geodesic velocity dx/ds and affine parameter."""

    x: Tuple[float, float]
    v: Tuple[float, float]
    s: float = 0.0


@dataclass(frozen=True)
class Outcome:
    """Channel reached by a trajectory."""

    label: str
    exit_channel_coordinate: float = float("nan")
    resonance_flag: bool = False
    dwell_length: float = 0.0

    def __post_init__(self) -> None:
        if self.label not in OUTCOME_LABELS:
            raise ValueError(f"unknown outcome label '{self.label}'")


@dataclass
class IntegrationOptions:
    """Knobs shared by the Newtonian and the direct geodesic integrators."""

    s_max: float = 1000.0
    rtol: float = 1e-9
    atol: float = 1e-12
    method: str = "RK45"
    sample_dt: float = 0.01
    sample_ds: float = 0.01
    max_samples: int = 200_000
    energy_tol: float = 1e-6
    exit_margin: float = 1e-3
    boundary_eps: float = 1e-8
    dwell_threshold: Optional[float] = None

    def __post_init__(self) -> None:
        if self.method not in ("RK45", "DOP853"):
            raise ValueError(f"integrator method must be RK45 or DOP853, got {self.method}")
        if not self.s_max > 0:
            raise ValueError("s_max must be positive")


@dataclass(eq=False)
class Trajectory:
    """
    Sampled trajectory.

    ``x`` holds positions, ``v`` the geodesic velocity dx/ds and ``velocity`` the
    Newtonian velocity dx/dt per sample.
    """

    s: np.ndarray
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    velocity: np.ndarray
    potential: np.ndarray
    energy: float
    mu0: float
    status: str
    outcome: Optional[Outcome] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    interpolant: Optional[Callable[[Any], np.ndarray]] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.s)

    @property
    def momentum_sq(self) -> np.ndarray:
        return 2.0 * self.mu0 * (self.energy - self.potential)

    def metric_speed(self) -> np.ndarray:
        """g_ij v^i v^j per sample."""
        return self.momentum_sq * np.sum(self.v * self.v, axis=1)

    def final_state(self) -> GeodesicState:
        return GeodesicState(
            (float(self.x[-1, 0]), float(self.x[-1, 1])),
            (float(self.v[-1, 0]), float(self.v[-1, 1])),
            float(self.s[-1]),
        )

    def to_frame(self) -> pd.DataFrame:
        """Trajectory export table with columns s, t, x1, x2, v1, v2, V, P0sq."""
        return pd.DataFrame(
            {
                "s": self.s,
                "t": self.t,
                "x1": self.x[:, 0],
                "x2": self.x[:, 1],
                "v1": self.v[:, 0],
                "v2": self.v[:, 1],
                "V": self.potential,
                "P0sq": self.momentum_sq,
            },
            columns=TRAJECTORY_COLUMNS,
        )


class ChristoffelSymbols(NamedTuple):
    """Christoffel symbols {k, ij} of the conformal metric."""

    g1_11: float
    g1_12: float
    g1_22: float
    g2_22: float
    g2_12: float
    g2_11: float


def christoffel(momentum_field: MomentumField, point: np.ndarray) -> ChristoffelSymbols:
    """
    Christoffel symbols of g_ik = P0^2 delta_ik built from phi = ln P0.

    Raises:
        TurningPointError: If P0^2 <= 0 at the point
    """
    p_sq = momentum_field.momentum_sq(point)
    if p_sq <= 0.0:
        raise TurningPointError(f"P0^2 = {p_sq:.3g} at ({point[0]:.6g}, {point[1]:.6g})")
    g1, g2 = momentum_field.surface.gradient(float(point[0]), float(point[1]))
    excess = p_sq / (2.0 * momentum_field.mu0)
    phi1 = -g1 / (2.0 * excess)
    phi2 = -g2 / (2.0 * excess)
    return ChristoffelSymbols(phi1, phi2, -phi1, phi2, phi1, -phi2)


def initial_state(
    momentum_field: MomentumField, x2_0: float, radius: Optional[float] = None
) -> GeodesicState:
    """
    Initial geodesic state in the (in) channel.

    The point sits at channel coordinate ``radius`` (the asymptotic radius by default)
    with transverse offset x2_0; the velocity points down the channel axis with unit
    metric speed.

    Raises:
        TurningPointError: If the initial point is classically forbidden
    """
    geometry = momentum_field.surface.channel_geometry()
    point = geometry.initial_point(x2_0, radius)
    p_sq = momentum_field.momentum_sq(point)
    if p_sq <= 0.0:
        raise TurningPointError(
            f"initial point ({point[0]:.6g}, {point[1]:.6g}) is classically forbidden "
            f"(P0^2 = {p_sq:.3g})"
        )
    direction = geometry.incoming_direction() / math.sqrt(p_sq)
    return GeodesicState(
        (float(point[0]), float(point[1])), (float(direction[0]), float(direction[1]))
    )


def _energy_scale(energy: float, v0: float) -> float:
    return max(abs(energy), abs(energy - v0), 1e-12)


def exit_events(
    geometry: ChannelGeometry,
    domain: Any,
    margin: float,
    position: Callable[[np.ndarray], np.ndarray],
) -> Dict[str, Callable[[float, np.ndarray], float]]:
    radius = geometry.asymptotic_radius + margin

    def exit_in(_: float, y: np.ndarray) -> float:
        u, w = geometry.channel_coords(position(y), "in")
        return min(u - radius, geometry.in_dissociation - w)

    def exit_out(_: float, y: np.ndarray) -> float:
        u, w = geometry.channel_coords(position(y), "out")
        return min(u - radius, geometry.out_dissociation - w)

    def dissociated(_: float, y: np.ndarray) -> float:
        p = position(y)
        _, w_in = geometry.channel_coords(p, "in")
        _, w_out = geometry.channel_coords(p, "out")
        distance = math.hypot(p[0] - geometry.center[0], p[1] - geometry.center[1])
        return min(
            w_in - geometry.in_dissociation,
            w_out - geometry.out_dissociation,
            distance - geometry.asymptotic_radius,
        )

    def left_domain(_: float, y: np.ndarray) -> float:
        p = position(y)
        return min(
            p[0] - domain.x1_min, domain.x1_max - p[0], p[1] - domain.x2_min, domain.x2_max - p[1]
        )

    for event, direction in ((exit_in, 1), (exit_out, 1), (dissociated, 1), (left_domain, -1)):
        event.terminal = True  # type: ignore[attr-defined]
        event.direction = direction  # type: ignore[attr-defined]
    return {"in": exit_in, "out": exit_out, "dissociated": dissociated, "domain": left_domain}


def _status(names: Tuple[str, ...], t_events: list) -> str:
    for name, times in zip(names, t_events):
        if len(times):
            return name
    return "t_end"


def _sample_grid(start: float, end: float, spacing: float, max_samples: int) -> np.ndarray:
    count = int(math.ceil((end - start) / spacing)) if end > start else 1
    count = min(max(count, 1), max_samples - 1)
    return np.linspace(start, end, count + 1)


def _integrate_newton(
    surface: PotentialSurface,
    energy: float,
    x0: np.ndarray,
    velocity0: np.ndarray,
    opts: IntegrationOptions,
    t_end: Optional[float] = None,
    with_events: bool = True,
) -> Trajectory:
    """Integrate mu0 xddot = -grad V with ds/dt = mu0 |xdot|^2."""
    mu0 = surface.mu0
    geometry = surface.channel_geometry()

    def rhs(_: float, y: np.ndarray) -> np.ndarray:
        g1, g2 = surface.gradient(y[0], y[1])
        return np.array([y[2], y[3], -g1 / mu0, -g2 / mu0, mu0 * (y[2] * y[2] + y[3] * y[3])])

    def s_limit(_: float, y: np.ndarray) -> float:
        return y[4] - opts.s_max

    s_limit.terminal = True  # type: ignore[attr-defined]
    s_limit.direction = 1  # type: ignore[attr-defined]

    names: Tuple[str, ...] = ()
    events: list = []
    if with_events:
        exits = exit_events(geometry, surface.domain, opts.exit_margin, lambda y: y[:2])
        names = tuple(exits) + ("s_max",)
        events = list(exits.values()) + [s_limit]

    y0 = np.array([x0[0], x0[1], velocity0[0], velocity0[1], 0.0], dtype=float)
    sol = solve_ivp(
        rhs,
        (0.0, t_end if t_end is not None else 1e9),
        y0,
        method=opts.method,
        dense_output=True,
        events=events or None,
        rtol=opts.rtol,
        atol=opts.atol,
    )

    if sol.status == -1:
        partial = _newton_samples(surface, energy, sol.t, sol.y.T, "failed")
        raise IntegrationError(f"Newtonian integration failed: {sol.message}", partial=partial)

    status = _status(names, sol.t_events) if with_events else "t_end"
    t_grid = _sample_grid(0.0, float(sol.t[-1]), opts.sample_dt, opts.max_samples)
    states = sol.sol(t_grid).T
    states[-1] = sol.y[:, -1]
    traj = _newton_samples(surface, energy, t_grid, states, status)
    traj.interpolant = sol.sol
    traj.diagnostics.update({"nfev": int(sol.nfev), "steps": int(len(sol.t) - 1)})

    v0 = surface.value(x0[0], x0[1])
    scale = _energy_scale(energy, v0)
    kinetic = 0.5 * mu0 * np.sum(traj.velocity**2, axis=1)
    drift = float(np.max(np.abs(kinetic + traj.potential - energy)) / scale)
    interior = traj.momentum_sq > 2.0 * mu0 * 0.01 * scale
    speed = traj.metric_speed()[interior]
    traj.diagnostics["energy_drift"] = drift
    traj.diagnostics["metric_speed_drift"] = (
        float(np.max(np.abs(speed - 1.0))) if speed.size else 0.0
    )
    logger.debug(
        f"Newtonian run: status={status}, t={traj.t[-1]:.4g}, s={traj.s[-1]:.4g}, "
        f"nfev={sol.nfev}, drift={drift:.3g}"
    )
    if drift > opts.energy_tol:
        raise EnergyDriftError(
            f"energy drift {drift:.3g} exceeds tolerance {opts.energy_tol:.3g}", partial=traj
        )
    return traj


def _newton_samples(
    surface: PotentialSurface, energy: float, t: np.ndarray, states: np.ndarray, status: str
) -> Trajectory:
    mu0 = surface.mu0
    x = states[:, :2].copy()
    velocity = states[:, 2:4].copy()
    potential = np.array([surface.value(p[0], p[1]) for p in x])
    two_kinetic = mu0 * np.sum(velocity * velocity, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = velocity / two_kinetic[:, None]
    return Trajectory(
        s=states[:, 4].copy(),
        t=np.asarray(t, dtype=float).copy(),
        x=x,
        v=v,
        velocity=velocity,
        potential=potential,
        energy=float(energy),
        mu0=mu0,
        status=status,
    )


def _check_unit_speed(momentum_field: MomentumField, ic: GeodesicState) -> float:
    p_sq = momentum_field.momentum_sq(np.array(ic.x))
    if p_sq <= 0.0:
        raise TurningPointError(f"initial point {ic.x} is classically forbidden")
    speed = p_sq * (ic.v[0] ** 2 + ic.v[1] ** 2)
    if abs(speed - 1.0) > 1e-8:
        raise DomainError(f"initial metric speed must be 1, got {speed:.12g}")
    return p_sq


def integrate(
    momentum_field: MomentumField,
    ic: GeodesicState,
    opts: Optional[IntegrationOptions] = None,
    dwell_threshold: Optional[float] = None,
) -> Trajectory:
    """
    Integrate a geodesic of the Jacobi metric and classify its outcome.

    The Newtonian form is integrated internally (dx/dt = 2(E - V) dx/ds) and the
    affine parameter is reconstructed by ds = 2(E - V) dt.

    Args:
        momentum_field: The P0^2 field fixing surface and energy
        ic: Initial state with unit metric speed
        opts: Integration options
        dwell_threshold: Dwell length that flags a resonance; see classify

    Returns:
        Trajectory: Samples uniform in Newtonian time, with outcome attached

    Raises:
        TurningPointError: If the initial point is forbidden
        DomainError: If the initial metric speed is not 1
        IntegrationError: On step-size underflow (partial trajectory attached)
        EnergyDriftError: If energy drift exceeds opts.energy_tol
    """
    opts = opts or IntegrationOptions()
    p_sq = _check_unit_speed(momentum_field, ic)
    two_excess = p_sq / momentum_field.mu0
    velocity0 = two_excess * np.array(ic.v)
    traj = _integrate_newton(
        momentum_field.surface, momentum_field.energy, np.array(ic.x), velocity0, opts
    )
    if ic.s:
        traj.s = traj.s + ic.s
    geometry = momentum_field.surface.channel_geometry()
    threshold = dwell_threshold if dwell_threshold is not None else opts.dwell_threshold
    traj.outcome = classify(traj, geometry, threshold)
    return traj


def newton_oracle(
    surface: PotentialSurface,
    energy: float,
    position: Tuple[float, float],
    velocity: Tuple[float, float],
    opts: Optional[IntegrationOptions] = None,
    dwell_threshold: Optional[float] = None,
    classify_outcome: bool = True,
) -> Trajectory:
    """
    Integrate mu0 xddot = -grad V at fixed total energy.

    Args:
        surface: The potential surface
        energy: Total energy E (eV)
        position: Initial point
        velocity: Initial Newtonian velocity dx/dt
        opts: Integration options
        dwell_threshold: Dwell length that flags a resonance
        classify_outcome: Attach an outcome (disable for closed orbits)

    Returns:
        Trajectory: Samples uniform in Newtonian time

    Raises:
        DomainError: If the kinetic energy differs from E - V by more than 1e-10
        EnergyDriftError: If energy drift exceeds opts.energy_tol
    """
    opts = opts or IntegrationOptions()
    x0 = np.array(position, dtype=float)
    v0 = np.array(velocity, dtype=float)
    kinetic = 0.5 * surface.mu0 * float(v0 @ v0)
    excess = energy - surface.value(x0[0], x0[1])
    if abs(kinetic - excess) > 1e-10 * max(1.0, abs(energy)):
        raise DomainError(
            f"kinetic energy {kinetic:.12g} does not match E - V = {excess:.12g}"
        )
    traj = _integrate_newton(surface, energy, x0, v0, opts)
    if classify_outcome:
        threshold = dwell_threshold if dwell_threshold is not None else opts.dwell_threshold
        traj.outcome = classify(traj, surface.channel_geometry(), threshold)
    return traj


def integrate_direct(
    momentum_field: MomentumField, ic: GeodesicState, opts: Optional[IntegrationOptions] = None
) -> Trajectory:
    """
    Integrate the geodesic equations x''^k = -{k,ij} x'^i x'^j directly in s.

    Newtonian time is accumulated as dt/ds = 1 / (2(E - V)). The metric degenerates
    at the turning locus, so the run stops with TurningPointError when P0^2 falls
    below opts.boundary_eps.

    Returns:
        Trajectory: Samples uniform in s, outcome attached

    Raises:
        TurningPointError: If the trajectory approaches the turning locus
    """
    opts = opts or IntegrationOptions()
    _check_unit_speed(momentum_field, ic)
    surface = momentum_field.surface
    energy = momentum_field.energy
    mu0 = momentum_field.mu0
    geometry = surface.channel_geometry()

    def rhs(_: float, y: np.ndarray) -> np.ndarray:
        g1, g2 = surface.gradient(y[0], y[1])
        excess = energy - surface.value(y[0], y[1])
        phi1 = -g1 / (2.0 * excess)
        phi2 = -g2 / (2.0 * excess)
        u1, u2 = y[2], y[3]
        dot = phi1 * u1 + phi2 * u2
        uu = u1 * u1 + u2 * u2
        return np.array(
            [u1, u2, -(2.0 * u1 * dot - uu * phi1), -(2.0 * u2 * dot - uu * phi2), 0.5 / excess]
        )

    def turning(_: float, y: np.ndarray) -> float:
        return 2.0 * mu0 * (energy - surface.value(y[0], y[1])) - opts.boundary_eps

    turning.terminal = True  # type: ignore[attr-defined]
    turning.direction = -1  # type: ignore[attr-defined]

    exits = exit_events(geometry, surface.domain, opts.exit_margin, lambda y: y[:2])
    names = tuple(exits) + ("turning",)
    y0 = np.array([ic.x[0], ic.x[1], ic.v[0], ic.v[1], 0.0])
    sol = solve_ivp(
        rhs,
        (ic.s, ic.s + opts.s_max),
        y0,
        method=opts.method,
        dense_output=True,
        events=list(exits.values()) + [turning],
        rtol=opts.rtol,
        atol=opts.atol,
    )
    if sol.status == -1:
        end = sol.y[:, -1]
        excess = energy - surface.value(end[0], end[1])
        # The metric degenerates at V = E; step-size underflow there is a turning point
        if excess < 1e-3 * _energy_scale(energy, surface.value(ic.x[0], ic.x[1])):
            raise TurningPointError(
                f"geodesic stalled {excess:.3g} eV from the turning locus at s={sol.t[-1]:.6g}"
            )
        raise IntegrationError(f"geodesic integration failed: {sol.message}")

    status = _status(names, sol.t_events)
    if status == "turning":
        raise TurningPointError(f"geodesic reached the turning locus at s={sol.t[-1]:.6g}")
    if status == "t_end":
        status = "s_max"

    s_grid = _sample_grid(ic.s, float(sol.t[-1]), opts.sample_ds, opts.max_samples)
    states = sol.sol(s_grid).T
    states[-1] = sol.y[:, -1]
    x = states[:, :2].copy()
    v = states[:, 2:4].copy()
    potential = np.array([surface.value(p[0], p[1]) for p in x])
    velocity = v * (2.0 * (energy - potential))[:, None]
    traj = Trajectory(
        s=s_grid,
        t=states[:, 4].copy(),
        x=x,
        v=v,
        velocity=velocity,
        potential=potential,
        energy=energy,
        mu0=mu0,
        status=status,
        interpolant=sol.sol,
    )
    traj.diagnostics.update({"nfev": int(sol.nfev), "steps": int(len(sol.t) - 1)})
    speed = traj.metric_speed()
    traj.diagnostics["metric_speed_drift"] = float(np.max(np.abs(speed - 1.0)))
    traj.outcome = classify(traj, geometry, opts.dwell_threshold)
    return traj


def path_discrepancy(newton: Trajectory, direct: Trajectory) -> float:
    """
    Largest distance between a Newtonian and a direct run compared at equal arclength s.

    The direct run is evaluated through its dense output at the Newtonian samples
    inside the common s range.

    Raises:
        DomainError: If the direct run carries no interpolant
    """
    if direct.interpolant is None:
        raise DomainError("path comparison needs the dense output of the direct run")
    end = min(float(newton.s[-1]), float(direct.s[-1]))
    mask = (newton.s >= direct.s[0]) & (newton.s <= end)
    if not np.any(mask):
        raise DomainError("the two runs share no arclength range")
    positions = direct.interpolant(newton.s[mask])[:2].T
    return float(np.max(np.linalg.norm(positions - newton.x[mask], axis=1)))


def dwell_length(traj: Trajectory, geometry: ChannelGeometry) -> float:
    """Jacobi arclength s spent inside the interaction region."""
    inside = np.array([geometry.region(p) == "interaction" for p in traj.x])
    steps = np.diff(traj.s)
    return float(np.sum(steps[inside[:-1] & inside[1:]]))


def free_transit_length(geometry: ChannelGeometry, energy: float, mu0: float) -> float:
    """Jacobi arclength of a straight flat-floor crossing of the interaction region, 2 R P0."""
    return 2.0 * geometry.asymptotic_radius * math.sqrt(2.0 * mu0 * max(energy, 0.0))


def classify(
    traj: Trajectory, geometry: ChannelGeometry, dwell_threshold: Optional[float] = None
) -> Outcome:
    """
    Label a terminated trajectory by the region of its final sample.

    Args:
        traj: The trajectory
        geometry: Channel layout of the surface
        dwell_threshold: Dwell arclength inside the interaction region above which the
            resonance flag is set. Callers with an extremal ray pass three times its
            Jacobi length (see resonance_threshold); without one the default is three
            times free_transit_length

    Returns:
        Outcome: reflect, rearrange, dissociate or trapped

    Raises:
        ClassificationError: If the run ended inside the interaction region for any
            reason other than reaching s_max
    """
    if dwell_threshold is None:
        threshold = RESONANCE_FACTOR * free_transit_length(geometry, traj.energy, traj.mu0)
    else:
        threshold = dwell_threshold
    final = traj.x[-1]
    region = geometry.region(final)
    dwell = dwell_length(traj, geometry)
    resonant = dwell > threshold

    if region in REGION_LABELS:
        channel = region if region in ("in", "out") else "out"
        u, _ = geometry.channel_coords(final, channel)
        return Outcome(REGION_LABELS[region], u, resonant, dwell)
    if traj.status in ("s_max", "t_end"):
        return Outcome("trapped", float("nan"), resonant, dwell)
    raise ClassificationError(
        f"final point ({final[0]:.6g}, {final[1]:.6g}) lies in the interaction region "
        f"after status '{traj.status}' at s={traj.s[-1]:.6g}"
    )


def time_reversal_error(
    momentum_field: MomentumField, traj: Trajectory, opts: Optional[IntegrationOptions] = None
) -> float:
    """
    Distance between the initial point and the end of the time-reversed run.

    The final state is reversed and integrated for the same Newtonian duration.
    """
    opts = opts or IntegrationOptions()
    duration = float(traj.t[-1] - traj.t[0])
    reversed_run = _integrate_newton(
        momentum_field.surface,
        momentum_field.energy,
        traj.x[-1],
        -traj.velocity[-1],
        opts,
        t_end=duration,
        with_events=False,
    )
    return float(np.linalg.norm(reversed_run.x[-1] - traj.x[0]))
