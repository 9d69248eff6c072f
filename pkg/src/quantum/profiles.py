#!/usr/bin/env python
"""
Analytic frequency profiles with known reflection parameters.
"""

import logging
import math
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from src.scattering.itime import FrequencyProfile
from src.utils.errors import ConfigError, DomainError

logger = logging.getLogger(__name__)

PROFILE_NAMES = ("constant", "sudden-jump", "tanh", "random-smooth")


def _check_frequencies(*omegas: float) -> None:
    for omega in omegas:
        if not omega > 0:
            raise DomainError(f"frequencies must be positive, got {omega}")


def constant_profile(
    omega: float = 1.0, span: float = 20.0, samples: int = 2001
) -> FrequencyProfile:
    """Omega^2 = omega^2 over [-span, span]."""
    _check_frequencies(omega)
    tau = np.linspace(-span, span, samples)
    return FrequencyProfile(tau, np.full(samples, omega**2), omega, omega, name="constant")


def sudden_jump_profile(
    omega_in: float = 1.0, omega_out: float = 2.0, span: float = 20.0, samples: int = 2001
) -> FrequencyProfile:
    """
    Step from omega_in to omega_out at tau = 0.

    The jump is stored as a repeated tau = 0 sample, which the oscillator treats as
    a breakpoint.
    """
    _check_frequencies(omega_in, omega_out)
    half = samples // 2 + 1
    left = np.linspace(-span, 0.0, half)
    right = np.linspace(0.0, span, half)
    tau = np.concatenate([left, right])
    omega_sq = np.concatenate([np.full(half, omega_in**2), np.full(half, omega_out**2)])
    return FrequencyProfile(tau, omega_sq, omega_in, omega_out, name="sudden-jump")


def sudden_jump_reflection(omega_in: float, omega_out: float) -> float:
    """rho for an instantaneous frequency step."""
    _check_frequencies(omega_in, omega_out)
    return ((omega_out - omega_in) / (omega_out + omega_in)) ** 2


def tanh_profile(
    omega_in: float = 1.0,
    omega_out: float = 2.0,
    width: float = 1.0,
    span: Optional[float] = None,
    samples: int = 4001,
) -> FrequencyProfile:
    """
    Omega^2 = Omega_in^2 + (Omega_out^2 - Omega_in^2)(1 + tanh(tau/width))/2.

    Args:
        omega_in: Incoming frequency
        omega_out: Outgoing frequency
        width: Switching time scale
        span: Half-length of the tau range (default 20 widths, at least 20)
        samples: Number of samples

    Returns:
        FrequencyProfile: The smooth switch
    """
    _check_frequencies(omega_in, omega_out, width)
    span = span if span is not None else max(20.0 * width, 20.0)
    tau = np.linspace(-span, span, samples)
    omega_sq = omega_in**2 + (omega_out**2 - omega_in**2) * 0.5 * (1.0 + np.tanh(tau / width))
    return FrequencyProfile(
        tau, omega_sq, omega_in, omega_out, name="tanh", meta={"width": width}
    )


def tanh_reflection(omega_in: float, omega_out: float, width: float) -> float:
    """Closed-form rho of the tanh switch: sinh^2(pi w- T) / sinh^2(pi w+ T)."""
    _check_frequencies(omega_in, omega_out, width)
    minus = 0.5 * (omega_out - omega_in)
    plus = 0.5 * (omega_out + omega_in)
    # Ratio of sinh^2 written with exponentials to stay finite for large widths
    a, b = math.pi * abs(minus) * width, math.pi * plus * width
    return math.exp(2.0 * (a - b)) * (
        (1.0 - math.exp(-2.0 * a)) / (1.0 - math.exp(-2.0 * b))
    ) ** 2


def random_smooth_profile(
    seed: int = 0,
    omega_in: float = 1.0,
    omega_out: float = 1.5,
    bumps: int = 3,
    span: float = 30.0,
    samples: int = 6001,
) -> FrequencyProfile:
    """
    Smooth switch with a few random Gaussian bumps in the interaction region.

    Omega^2 stays above a quarter of the smaller asymptote squared.
    """
    _check_frequencies(omega_in, omega_out)
    rng = np.random.default_rng(seed)
    tau = np.linspace(-span, span, samples)
    base = omega_in**2 + (omega_out**2 - omega_in**2) * 0.5 * (1.0 + np.tanh(tau))
    floor = 0.25 * min(omega_in, omega_out) ** 2
    omega_sq = base.copy()
    for _ in range(bumps):
        center = rng.uniform(-3.0, 3.0)
        width = rng.uniform(0.4, 1.2)
        height = rng.uniform(-0.5, 1.0) * min(omega_in, omega_out) ** 2
        omega_sq += height * np.exp(-0.5 * ((tau - center) / width) ** 2)
    omega_sq = np.maximum(omega_sq, floor)
    return FrequencyProfile(
        tau, omega_sq, omega_in, omega_out, name="random-smooth", meta={"seed": seed}
    )


def named_profile(name: str, **kwargs) -> FrequencyProfile:
    """
    Build one of the analytic profiles by name.

    Raises:
        ConfigError: For an unknown name
    """
    builders = {
        "constant": constant_profile,
        "sudden-jump": sudden_jump_profile,
        "tanh": tanh_profile,
        "random-smooth": random_smooth_profile,
    }
    if name not in builders:
        raise ConfigError(
            f"unknown profile '{name}'", [f"/profile: expected one of {PROFILE_NAMES}"]
        )
    return builders[name](**kwargs)


def load_profile(path: Union[str, Path]) -> FrequencyProfile:
    """
    Read a profile CSV with columns tau and omega_sq.

    The asymptotic frequencies are taken from the first and last samples. Optional
    columns u and dtau_du describe a folded profile.
    """
    frame = pd.read_csv(path)
    missing = {"tau", "omega_sq"} - set(frame.columns)
    if missing:
        raise ConfigError(f"profile {path} lacks columns {sorted(missing)}")
    omega_sq = frame["omega_sq"].to_numpy(dtype=float)
    if omega_sq[0] <= 0 or omega_sq[-1] <= 0:
        raise DomainError("profile asymptotes must have Omega^2 > 0")
    u = frame["u"].to_numpy(dtype=float) if "u" in frame else None
    rate = frame["dtau_du"].to_numpy(dtype=float) if "dtau_du" in frame else None
    logger.info(f"Loaded profile {path} with {len(frame)} samples")
    return FrequencyProfile(
        frame["tau"].to_numpy(dtype=float),
        omega_sq,
        math.sqrt(omega_sq[0]),
        math.sqrt(omega_sq[-1]),
        u,
        rate,
        name=Path(path).stem,
    )
