#!/usr/bin/env python
"""
Configuration utilities for the three-body scattering toolkit.

Environment variables (optionally from a .env file at the repository root) provide
the defaults that run configs and command-line flags override.
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

PROJECT_ROOT = Path(__file__).parent.parent.parent
ENV_PATH = PROJECT_ROOT / ".env"

if ENV_PATH.exists():
    load_dotenv(ENV_PATH)

# Output settings
OUT_DIR = os.getenv("THREEBODY_OUT_DIR", "output")

# Execution settings
THREADS = int(os.getenv("THREEBODY_THREADS", "1"))
SEED = int(os.getenv("THREEBODY_SEED", "12345"))
LOG_LEVEL = os.getenv("THREEBODY_LOG_LEVEL", "INFO").upper()

# Integrator settings
RTOL = float(os.getenv("THREEBODY_RTOL", "1e-9"))
ATOL = float(os.getenv("THREEBODY_ATOL", "1e-12"))

CONFIG_DIR = PROJECT_ROOT / "configs"
SURROGATE_SURFACE = CONFIG_DIR / "surfaces" / "lifh_leps.json"

_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def init_config(env_file: Optional[Path] = None) -> None:
    """
    Load environment variables from a .env file.

    Args:
        env_file: Optional path to a .env file; defaults to the repository root .env
    """
    path = Path(env_file) if env_file else ENV_PATH
    if path.exists():
        load_dotenv(path, override=True)
        logger.debug(f"Loaded environment from {path}")


def get_config(key: str, default: Any = None) -> Any:
    """
    Get a raw configuration value from the environment.

    Args:
        key: The environment variable to look up
        default: Default value if the key is not set

    Returns:
        The configuration value or the default
    """
    return os.environ.get(key, default)


def get_run_defaults() -> Dict[str, Any]:
    """
    Return run defaults read from the current environment.

    Returns:
        Dict[str, Any]: out_dir, threads, seed, log_level, rtol, atol and r_asym
    """
    r_asym = os.getenv("THREEBODY_R_ASYM")
    return {
        "out_dir": os.getenv("THREEBODY_OUT_DIR", "output"),
        "threads": int(os.getenv("THREEBODY_THREADS", "1")),
        "seed": int(os.getenv("THREEBODY_SEED", "12345")),
        "log_level": os.getenv("THREEBODY_LOG_LEVEL", "INFO").upper(),
        "rtol": float(os.getenv("THREEBODY_RTOL", "1e-9")),
        "atol": float(os.getenv("THREEBODY_ATOL", "1e-12")),
        "r_asym": float(r_asym) if r_asym else None,
    }


def validate_config() -> Optional[str]:
    """
    Validate the environment configuration.

    Returns:
        Optional[str]: Error message if configuration is invalid, None if valid
    """
    problems = []
    try:
        defaults = get_run_defaults()
    except ValueError as e:
        return f"Malformed numeric setting: {e}"

    if defaults["threads"] < 1:
        problems.append("THREEBODY_THREADS must be >= 1")
    if defaults["log_level"] not in _LOG_LEVELS:
        problems.append(f"THREEBODY_LOG_LEVEL must be one of {', '.join(_LOG_LEVELS)}")
    if not 0 < defaults["rtol"] < 1:
        problems.append("THREEBODY_RTOL must lie in (0, 1)")
    if defaults["atol"] <= 0:
        problems.append("THREEBODY_ATOL must be positive")
    if defaults["r_asym"] is not None and defaults["r_asym"] <= 0:
        problems.append("THREEBODY_R_ASYM must be positive")

    if problems:
        return "; ".join(problems)
    return None


def is_config_valid() -> bool:
    """Check whether the environment configuration is valid."""
    return validate_config() is None
