#!/usr/bin/env python
"""
Stages behind the command-line subcommands.

Each ``run_*`` function takes a resolved RunConfig and an ArtifactWriter, writes
its artifacts and returns a JSON-ready summary. Numerical failures surface as
PipelineError naming the stage that failed.
"""

import logging
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.chaos.fractal import (
    boundary_box_dimension,
    boundary_cells,
    boundary_density,
    boundary_scaling,
)
from src.chaos.lyapunov import lyapunov_curve, lyapunov_max, shadow_lyapunov
from src.chaos.maps import OutcomeMap, map_family, outcome_map, self_similarity_zoom
from src.pipeline.settings import RunConfig, resolve_surface_path
from src.quantum.oscillator import OscillatorSolution, solve_xi
from src.quantum.profiles import load_profile, named_profile
from src.quantum.transitions import (
    number_state_oracle,
    oracle_agreement,
    parity_leak,
    transition_matrix,
    transition_summaries,
)
from src.scattering.geodesic import Trajectory, initial_state, integrate, time_reversal_error
from src.scattering.itime import (
    FrequencyProfile,
    InternalTimeSeries,
    TauMap,
    extrema_statistics,
    internal_time,
    omega_profile,
    trajectory_profile,
)
from src.scattering.ray import (
    ExtremalRay,
    SaddlePoint,
    extremal_ray,
    find_saddle,
    resonance_threshold,
)
from src.scattering.surfaces import LepsSurface, PotentialSurface, load_surface
from src.scattering.system import MomentumField, mass_scaled_coords
from src.utils.errors import ConfigError, DomainError, FitError, PipelineError, ThreeBodyError
from src.utils.exports import ArtifactWriter

logger = logging.getLogger(__name__)

PIPELINE_STAGES = (
    "surface",
    "initial-state",
    "trajectory",
    "saddle",
    "ray",
    "itime",
    "oscillator",
    "transitions",
)
_INTEGER_PROFILE_PARAMS = ("samples", "seed", "bumps")


@contextmanager
def stage(name: str) -> Iterator[None]:
    """Attach the stage name to numerical failures raised inside the block."""
    try:
        yield
    except (ConfigError, PipelineError):
        raise
    except ThreeBodyError as e:
        logger.error(f"Stage '{name}' failed: {e}")
        raise PipelineError(name, e) from e


@dataclass
class ScatteringContext:
    """Objects shared by the stages of one run."""

    config: RunConfig
    surface_path: Path
    surface: PotentialSurface
    field: MomentumField


def prepare(config: RunConfig) -> ScatteringContext:
    with stage("surface"):
        surface_path = resolve_surface_path(config)
        surface = load_surface(surface_path, config.asymptotic_radius)
        field = MomentumField(surface, config.energy, surface.mu0)
    return ScatteringContext(config, surface_path, surface, field)


def default_saddle_guess(surface: PotentialSurface) -> Tuple[float, float]:
    """Start point for the saddle search when the config gives none."""
    if isinstance(surface, LepsSurface) and surface.masses is not None:
        point = mass_scaled_coords(1.9, 1.1, surface.masses)
        return float(point[0]), float(point[1])
    center = surface.channel_geometry().center
    return float(center[0]), float(center[1])


def _trajectory(ctx: ScatteringContext, ray: Optional[ExtremalRay] = None) -> Trajectory:
    """
    Integrate the configured start.

    An unset dwell threshold becomes three Jacobi lengths of the extremal ray; when no
    ray can be traced the classifier falls back to the free-transit estimate.
    """
    config = ctx.config
    opts = config.integrator.options()
    if opts.dwell_threshold is None:
        if ray is None:
            try:
                _, ray = _ray(ctx)
            except PipelineError as e:
                logger.warning(f"Resonance threshold without an extremal ray: {e}")
        if ray is not None:
            opts.dwell_threshold = resonance_threshold(ray)
            logger.debug(f"Resonance dwell threshold {opts.dwell_threshold:.4g}")
    with stage("initial-state"):
        ic = initial_state(ctx.field, config.x2_0)
    with stage("trajectory"):
        traj = integrate(ctx.field, ic, opts)
    traj.diagnostics["dwell_threshold"] = opts.dwell_threshold
    logger.info(f"Trajectory outcome: {traj.outcome.label} after s = {traj.s[-1]:.4g}")
    return traj


def _ray(ctx: ScatteringContext) -> Tuple[SaddlePoint, ExtremalRay]:
    settings = ctx.config.ray
    with stage("saddle"):
        guess = settings.saddle_guess or default_saddle_guess(ctx.surface)
        saddle = find_saddle(ctx.surface, guess)
    logger.info(f"Saddle at {saddle.location} with V = {saddle.energy:.6g} eV")
    with stage("ray"):
        ray = extremal_ray(
            ctx.surface,
            ctx.config.energy,
            saddle,
            spacing=settings.spacing,
            offset=settings.offset,
            stall_tol=settings.stall_tol,
            extension=settings.extension,
            tube_radius=settings.tube_radius,
        )
    logger.info(f"Extremal ray of length {ray.length:.4g} with {ray.size} samples")
    return saddle, ray


def _ray_profile(ctx: ScatteringContext, ray: ExtremalRay, tau_map: TauMap) -> FrequencyProfile:
    settings = ctx.config.ray
    with stage("itime"):
        return omega_profile(
            ray,
            ctx.field,
            ctx.config.energy,
            variant=settings.omega_variant,
            tail_tol=settings.tail_tol,
            tau_map=tau_map,
        )


def _solve(config: RunConfig, profile: FrequencyProfile) -> OscillatorSolution:
    settings = config.oscillator
    with stage("oscillator"):
        solution = solve_xi(
            profile,
            rtol=settings.rtol,
            atol=settings.atol,
            method=settings.method,
            asymptote_tol=settings.asymptote_tol,
            residual_tol=settings.residual_tol,
            tail_fraction=settings.tail_fraction,
        )
    logger.info(f"Reflection parameter rho = {solution.rho:.6g} ({profile.name})")
    return solution


def _solution_frame(solution: OscillatorSolution) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "tau": solution.tau,
            "xi_re": solution.xi.real,
            "xi_im": solution.xi.imag,
            "xi_dot_re": solution.xi_dot.real,
            "xi_dot_im": solution.xi_dot.imag,
        }
    )


def _trajectory_summary(traj: Trajectory) -> Dict[str, Any]:
    outcome = traj.outcome
    return {
        "status": traj.status,
        "outcome": outcome.label if outcome else None,
        "exit_channel_coordinate": outcome.exit_channel_coordinate if outcome else None,
        "resonance_flag": outcome.resonance_flag if outcome else None,
        "dwell_length": outcome.dwell_length if outcome else None,
        "s_final": float(traj.s[-1]),
        "t_final": float(traj.t[-1]),
        "diagnostics": traj.diagnostics,
    }


def run_trajectory(config: RunConfig, writer: ArtifactWriter) -> Dict[str, Any]:
    """One classified trajectory with its Newtonian time-reversal check."""
    ctx = prepare(config)
    traj = _trajectory(ctx)
    summary = _trajectory_summary(traj)
    with stage("trajectory"):
        summary["time_reversal_error"] = time_reversal_error(
            ctx.field, traj, config.integrator.options()
        )
    writer.write_csv("trajectory.csv", traj.to_frame())
    writer.write_json("trajectory.json", summary)
    return summary


def run_itime(config: RunConfig, writer: ArtifactWriter) -> Dict[str, Any]:
    """Internal time of one trajectory and the Omega^2 profile of the ray."""
    ctx = prepare(config)
    saddle, ray = _ray(ctx)
    traj = _trajectory(ctx, ray)
    tau_map = TauMap(ray, config.energy)
    with stage("itime"):
        series = internal_time(traj, ray, config.energy, tau_map=tau_map)
    profile = _ray_profile(ctx, ray, tau_map)
    summary = {
        "trajectory": _trajectory_summary(traj),
        "saddle": saddle.as_array().tolist(),
        "ray_length": ray.length,
        "tau_quadrature": tau_map.meta,
        "monotone": series.monotone,
        "extrema": extrema_statistics(series),
        "omega_in": profile.omega_in,
        "omega_out": profile.omega_out,
    }
    writer.write_csv("ray.csv", ray.to_frame())
    writer.write_csv("itime.csv", series.to_frame())
    writer.write_csv("omega_profile.csv", profile.to_frame())
    writer.write_json("itime.json", summary)
    return summary


def _configured_profile(config: RunConfig) -> Optional[FrequencyProfile]:
    settings = config.oscillator
    if settings.profile_file:
        with stage("oscillator"):
            return load_profile(settings.profile_file)
    if settings.profile:
        params: Dict[str, Any] = dict(settings.profile_params)
        for key in _INTEGER_PROFILE_PARAMS:
            if key in params:
                params[key] = int(params[key])
        if settings.profile == "random-smooth" and "seed" not in params:
            params["seed"] = config.seed
        try:
            return named_profile(settings.profile, **params)
        except TypeError as e:
            raise ConfigError(str(e), [f"/oscillator/profile_params: {e}"]) from e
    return None


def _profile(config: RunConfig) -> FrequencyProfile:
    profile = _configured_profile(config)
    if profile is not None:
        return profile
    ctx = prepare(config)
    _, ray = _ray(ctx)
    return _ray_profile(ctx, ray, TauMap(ray, config.energy))


def run_oscillator(config: RunConfig, writer: ArtifactWriter) -> Dict[str, Any]:
    """Solve the auxiliary oscillator on a named, tabulated or ray profile."""
    profile = _profile(config)
    solution = _solve(config, profile)
    summary = solution.summary()
    summary["profile"] = profile.name
    writer.write_csv("xi.csv", _solution_frame(solution))
    writer.write_json("oscillator.json", summary)
    return summary


def _transitions(
    config: RunConfig, rho: float, profile: Optional[FrequencyProfile], writer: ArtifactWriter
) -> Dict[str, Any]:
    settings = config.transitions
    with stage("transitions"):
        matrix = transition_matrix(
            rho, settings.n_max, settings.variant, settings.deficit_bound, settings.strict
        )
        literal = transition_matrix(rho, settings.n_max, "literal", deficit_bound=1.0)
        summary = matrix.summary()
        summary["literal_discrepancy"] = float(np.max(np.abs(matrix.W - literal.W)))
        if settings.oracle and profile is not None:
            oracle = number_state_oracle(profile, settings.n_max)
            summary["oracle"] = {
                "max_difference": oracle_agreement(matrix, oracle),
                "parity_leak": parity_leak(oracle),
                "dimension": oracle.dimension,
            }
    writer.write_csv("transitions.csv", matrix.to_frame())
    writer.write_csv("transition_variants.csv", transition_summaries([matrix, literal]))
    return summary


def run_transitions(config: RunConfig, writer: ArtifactWriter) -> Dict[str, Any]:
    """Transition matrix for a configured rho or for the rho of a profile."""
    profile = None
    rho = config.transitions.rho
    if rho is None:
        profile = _profile(config)
        rho = _solve(config, profile).rho
    summary = _transitions(config, rho, profile, writer)
    writer.write_json("transitions.json", summary)
    return summary


def _box_summary(grid: OutcomeMap, scales, base: int = 2) -> Optional[Dict[str, Any]]:
    try:
        return boundary_box_dimension(grid, scales, base=base).summary()
    except (FitError, DomainError) as e:
        logger.warning(f"Box counting skipped: {e}")
        return None


def _write_map(writer: ArtifactWriter, name: str, grid: OutcomeMap, config: RunConfig) -> Dict:
    sidecar = grid.sidecar()
    sidecar["box_count"] = _box_summary(grid, config.map.box_scales, config.map.box_base)
    writer.write_pgm(f"{name}.pgm", grid.to_image())
    writer.write_json(f"{name}.json", sidecar)
    if config.map.write_csv:
        writer.write_csv(f"{name}.csv", grid.to_frame())
    return sidecar


def _map(ctx: ScatteringContext, progress: bool) -> OutcomeMap:
    config = ctx.config
    settings = config.map
    with stage("map"):
        return outcome_map(
            ctx.surface,
            settings.e_range,
            settings.x2_range,
            settings.resolution,
            config.integrator.options(),
            threads=config.threads or 1,
            progress=progress,
            metadata={"seed": config.seed},
        )


def run_map(config: RunConfig, writer: ArtifactWriter, progress: bool = True) -> Dict[str, Any]:
    """Outcome map over (E_k, x2_0) as PGM plus JSON sidecar."""
    ctx = prepare(config)
    grid = _map(ctx, progress)
    sidecar = _write_map(writer, "map", grid, config)
    summary = {"counts": sidecar["counts"], "box_count": sidecar["box_count"]}
    if config.map.scaling_resolutions:
        summary["boundary_scaling"] = _scaling(ctx, config.map.scaling_resolutions)
        writer.write_json("boundary_scaling.json", summary["boundary_scaling"])
    return summary


def _scaling(ctx: ScatteringContext, resolutions: List[int]) -> Dict[str, Any]:
    """Boundary-cell counts of the map window at several resolutions and their slope."""
    config = ctx.config
    settings = config.map
    with stage("map"):
        family = map_family(
            ctx.surface,
            settings.e_range,
            settings.x2_range,
            resolutions,
            config.integrator.options(),
            threads=config.threads or 1,
        )
    counts = [int(boundary_cells(grid.codes).sum()) for grid in family]
    try:
        slope: Optional[float] = boundary_scaling(family, resolutions)
    except FitError as e:
        logger.warning(f"Boundary scaling skipped: {e}")
        slope = None
    else:
        logger.info(f"Boundary cells grow with resolution as n^{slope:.3f}")
    return {"resolutions": list(resolutions), "counts": counts, "slope": slope}


def run_selfsim(config: RunConfig, writer: ArtifactWriter, progress: bool = True) -> Dict[str, Any]:
    """Parent map and one recomputed zoom level with their boundary densities."""
    ctx = prepare(config)
    parent = _map(ctx, progress)
    settings = config.map
    center = settings.zoom_center or (
        0.5 * sum(settings.e_range),
        0.5 * sum(settings.x2_range),
    )
    with stage("map"):
        child = self_similarity_zoom(
            parent,
            ctx.surface,
            center,
            settings.zoom_factor,
            config.integrator.options(),
            threads=config.threads or 1,
            progress=progress,
        )
    _write_map(writer, "map", parent, config)
    _write_map(writer, "zoom", child, config)
    parent_density = boundary_density(parent.codes)
    child_density = boundary_density(child.codes)
    summary = {
        "zoom_center": list(center),
        "zoom_factor": settings.zoom_factor,
        "parent_density": parent_density,
        "zoom_density": child_density,
        "density_ratio": child_density / parent_density if parent_density > 0 else None,
    }
    writer.write_json("selfsim.json", summary)
    return summary


def run_lyapunov(config: RunConfig, writer: ArtifactWriter) -> Dict[str, Any]:
    """Largest Lyapunov exponent at the configured energy, optionally over an energy grid."""
    ctx = prepare(config)
    settings = config.lyapunov
    opts = settings.options(config.seed or 0)
    with stage("initial-state"):
        ic = initial_state(ctx.field, config.x2_0)
    with stage("lyapunov"):
        estimate = lyapunov_max(ctx.field, ic, opts)
        summary = estimate.summary()
        if settings.shadow:
            summary["shadow"] = shadow_lyapunov(ctx.field, ic, opts).summary()
        if settings.energies:
            curve = lyapunov_curve(ctx.surface, settings.energies, config.x2_0, opts)
            writer.write_csv("lyapunov_curve.csv", curve)
    writer.write_csv("lyapunov.csv", estimate.history)
    writer.write_json("lyapunov.json", summary)
    return summary


def run_pipeline(config: RunConfig, writer: ArtifactWriter) -> Dict[str, Any]:
    """
    Surface, trajectory, ray, internal time, oscillator and transitions for one start.

    Returns:
        Dict: outcome, tau extrema, rho and the transition summary

    Raises:
        PipelineError: Naming the first failing stage
    """
    ctx = prepare(config)
    _, ray = _ray(ctx)
    traj = _trajectory(ctx, ray)
    tau_map = TauMap(ray, config.energy)
    with stage("itime"):
        series: InternalTimeSeries = internal_time(traj, ray, config.energy, tau_map=tau_map)
    ray_profile = _ray_profile(ctx, ray, tau_map)
    with stage("itime"):
        profile = trajectory_profile(series, ray_profile)
    solution = _solve(config, profile)
    summary: Dict[str, Any] = {
        "trajectory": _trajectory_summary(traj),
        "monotone": series.monotone,
        "extrema": extrema_statistics(series),
        "omega_in": profile.omega_in,
        "omega_out": profile.omega_out,
        "rho": solution.rho,
        "wronskian_drift": solution.wronskian_drift,
    }
    summary["transitions"] = _transitions(config, solution.rho, profile, writer)
    if config.persist_intermediate:
        writer.write_csv("trajectory.csv", traj.to_frame())
        writer.write_csv("ray.csv", ray.to_frame())
        writer.write_csv("itime.csv", series.to_frame())
        writer.write_csv("omega_profile.csv", ray_profile.to_frame())
        writer.write_csv("xi.csv", _solution_frame(solution))
    writer.write_json("pipeline.json", summary)
    logger.info(
        f"Pipeline done: {summary['trajectory']['outcome']}, rho = {solution.rho:.6g}, "
        f"{summary['extrema']['count']} tau extrema"
    )
    return summary


COMMANDS: Dict[str, Callable[[RunConfig, ArtifactWriter], Dict[str, Any]]] = {
    "trajectory": run_trajectory,
    "itime": run_itime,
    "oscillator": run_oscillator,
    "transitions": run_transitions,
    "map": run_map,
    "lyapunov": run_lyapunov,
    "selfsim": run_selfsim,
    "pipeline": run_pipeline,
}

