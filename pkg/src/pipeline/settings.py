#!/usr/bin/env python
"""
Run configuration schema.

A run config is a JSON document validated by RunConfig. Values are layered:
command-line flags override the config file, which overrides the environment
(see src.utils.config), which overrides the built-in defaults below.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.chaos.lyapunov import LyapunovOptions
from src.scattering.geodesic import IntegrationOptions
from src.utils.config import CONFIG_DIR, SURROGATE_SURFACE, get_run_defaults
from src.utils.errors import ConfigError, pointer_diagnostics

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)


class IntegratorSettings(_Section):
    """Trajectory integration."""

    s_max: float = Field(1000.0, gt=0, description="Largest affine parameter before 'trapped'")
    rtol: float = Field(1e-9, gt=0, lt=1, description="Relative tolerance")
    atol: float = Field(1e-12, gt=0, description="Absolute tolerance")
    method: Literal["RK45", "DOP853"] = Field("RK45", description="Embedded Runge-Kutta pair")
    sample_dt: float = Field(0.01, gt=0, description="Output spacing in Newtonian time")
    energy_tol: float = Field(1e-6, gt=0, description="Accepted relative energy drift")
    exit_margin: float = Field(1e-3, ge=0, description="Margin past R_asym for exit events")
    dwell_threshold: Optional[float] = Field(None, gt=0, description="Resonance dwell length")

    def options(self) -> IntegrationOptions:
        return IntegrationOptions(
            s_max=self.s_max,
            rtol=self.rtol,
            atol=self.atol,
            method=self.method,
            sample_dt=self.sample_dt,
            energy_tol=self.energy_tol,
            exit_margin=self.exit_margin,
            dwell_threshold=self.dwell_threshold,
        )


class RaySettings(_Section):
    """Saddle search and extremal ray."""

    saddle_guess: Optional[Tuple[float, float]] = Field(None, description="Newton start point")
    spacing: float = Field(0.005, gt=0, description="Arclength spacing of ray samples")
    offset: float = Field(1e-4, gt=0, description="Initial step off the saddle")
    stall_tol: float = Field(1e-6, gt=0, description="Gradient norm that ends the descent")
    extension: float = Field(1.0, ge=0, description="Straight continuation past R_asym")
    tube_radius: Optional[float] = Field(None, gt=0, description="Projection tube radius")
    omega_variant: Literal["literal", "flipped"] = "literal"
    tail_tol: float = Field(1e-3, gt=0, description="Relative Omega^2 spread over each tail")


class OscillatorSettings(_Section):
    """Auxiliary oscillator and the profile it is solved on."""

    rtol: float = Field(1e-11, gt=0, lt=1)
    atol: float = Field(1e-12, gt=0)
    method: Literal["RK45", "DOP853"] = "DOP853"
    residual_tol: float = Field(1e-8, gt=0)
    tail_fraction: float = Field(0.1, gt=0, lt=1)
    asymptote_tol: float = Field(1e-2, gt=0)
    profile: Optional[Literal["constant", "sudden-jump", "tanh", "random-smooth"]] = None
    profile_file: Optional[str] = None
    profile_params: Dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_source(self) -> "OscillatorSettings":
        if self.profile is not None and self.profile_file is not None:
            raise ValueError("give either profile or profile_file, not both")
        return self


class TransitionSettings(_Section):
    """Transition probabilities."""

    n_max: int = Field(10, ge=0, le=120)
    variant: Literal["frozen", "literal"] = "frozen"
    deficit_bound: float = Field(1e-3, gt=0)
    strict: bool = False
    rho: Optional[float] = Field(None, ge=0, lt=1, description="Use this rho instead of a profile")
    oracle: bool = Field(False, description="Also run the number-state evolution")


class MapSettings(_Section):
    """Outcome maps and boundary analysis."""

    e_range: Tuple[float, float] = (0.9, 2.0)
    x2_range: Tuple[float, float] = (-0.2, 0.2)
    resolution: Tuple[int, int] = (32, 32)
    box_scales: Optional[List[int]] = None
    box_base: int = Field(2, ge=2, description="Ratio between default box sizes")
    scaling_resolutions: Optional[List[int]] = Field(
        None, description="Square resolutions of the boundary-scaling family"
    )
    zoom_center: Optional[Tuple[float, float]] = None
    zoom_factor: float = Field(2.0, ge=2)
    write_csv: bool = False

    @model_validator(mode="after")
    def check_ranges(self) -> "MapSettings":
        if self.e_range[0] > self.e_range[1]:
            raise ValueError("e_range must be ordered")
        if self.e_range[0] <= 0:
            raise ValueError("e_range must be positive")
        if self.x2_range[0] > self.x2_range[1]:
            raise ValueError("x2_range must be ordered")
        if min(self.resolution) < 1:
            raise ValueError("resolution must be positive")
        if self.scaling_resolutions is not None:
            if len(self.scaling_resolutions) < 2 or min(self.scaling_resolutions) < 1:
                raise ValueError("scaling_resolutions needs at least two positive entries")
        return self


class LyapunovSettings(_Section):
    """Benettin estimate."""

    renorm_interval: float = Field(1.0, gt=0)
    s_total: float = Field(200.0, gt=0)
    min_length: float = Field(20.0, ge=0)
    rtol: float = Field(1e-10, gt=0, lt=1)
    atol: float = Field(1e-12, gt=0)
    energies: Optional[List[float]] = None
    shadow: bool = Field(False, description="Also run the finite-separation estimate")

    def options(self, seed: int) -> LyapunovOptions:
        return LyapunovOptions(
            renorm_interval=self.renorm_interval,
            s_total=self.s_total,
            min_length=self.min_length,
            rtol=self.rtol,
            atol=self.atol,
            seed=seed,
        )


class RunConfig(_Section):
    """Complete description of one run."""

    schema_version: Literal[1] = SCHEMA_VERSION
    surface: str = Field(str(SURROGATE_SURFACE), description="Surface definition file")
    asymptotic_radius: Optional[float] = Field(None, gt=0)
    energy: float = Field(1.5, gt=0, description="Collision energy E_k in eV")
    x2_0: float = Field(0.0, description="Initial transverse offset in the (in) channel")
    out_dir: Optional[str] = None
    threads: Optional[int] = Field(None, ge=1)
    seed: Optional[int] = None
    persist_intermediate: bool = True
    integrator: IntegratorSettings = Field(default_factory=IntegratorSettings)
    ray: RaySettings = Field(default_factory=RaySettings)
    oscillator: OscillatorSettings = Field(default_factory=OscillatorSettings)
    transitions: TransitionSettings = Field(default_factory=TransitionSettings)
    map: MapSettings = Field(default_factory=MapSettings)
    lyapunov: LyapunovSettings = Field(default_factory=LyapunovSettings)


def _apply_environment(config: RunConfig) -> RunConfig:
    """Fill values absent from the config file with environment defaults."""
    env = get_run_defaults()
    update: Dict[str, Any] = {}
    for key in ("out_dir", "threads", "seed"):
        if getattr(config, key) is None:
            update[key] = env[key]
    if config.asymptotic_radius is None and env["r_asym"] is not None:
        update["asymptotic_radius"] = env["r_asym"]
    integrator = {
        key: env[key] for key in ("rtol", "atol") if key not in config.integrator.model_fields_set
    }
    if integrator:
        update["integrator"] = config.integrator.model_copy(update=integrator)
    return config.model_copy(update=update)


def merge_overrides(data: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively overlay non-None override values onto a config mapping."""
    merged = dict(data)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_overrides(merged[key], value)
        elif isinstance(value, dict):
            merged[key] = merge_overrides({}, value)
        else:
            merged[key] = value
    return merged


def parse_run_config(data: Dict[str, Any], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Validate a run config mapping and apply environment defaults and flag overrides.

    Args:
        data: Parsed config document
        overrides: Top-level values from command-line flags (None values are ignored)

    Returns:
        RunConfig: The resolved configuration

    Raises:
        ConfigError: With one /json/pointer diagnostic per schema violation
    """
    merged = merge_overrides(data, overrides or {})
    try:
        config = RunConfig.model_validate(merged)
    except ValidationError as e:
        raise ConfigError("invalid run config", pointer_diagnostics(e)) from e
    return _apply_environment(config)


def load_run_config(
    path: Optional[Union[str, Path]], overrides: Optional[Dict[str, Any]] = None
) -> RunConfig:
    """
    Read a run config file; without a path only defaults and overrides apply.

    Raises:
        ConfigError: If the file is missing, not JSON, or fails validation
    """
    data: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError as e:
            raise ConfigError(
                f"config file not found: {path}", [f"/: {path} does not exist"]
            ) from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file is not valid JSON: {path}", [f"/: {e}"]) from e
        if not isinstance(data, dict):
            raise ConfigError("config root must be an object", ["/: expected an object"])
        if "surface" in data and not Path(data["surface"]).is_absolute():
            candidate = path.parent / data["surface"]
            if candidate.exists():
                data["surface"] = str(candidate)
    config = parse_run_config(data, overrides)
    logger.debug(f"Resolved run config: {config.model_dump()}")
    return config


def resolve_surface_path(config: RunConfig) -> Path:
    """Locate the surface file: as given, then under configs/surfaces."""
    path = Path(config.surface)
    if path.exists():
        return path
    candidate = CONFIG_DIR / "surfaces" / path.name
    if candidate.exists():
        return candidate
    raise ConfigError(f"surface file not found: {path}", [f"/surface: {path} does not exist"])
