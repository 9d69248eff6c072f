#!/usr/bin/env python
"""
Main entry point for the collinear three-body scattering toolkit.
Every subcommand reads a run config, writes its artifacts to the output
directory and finishes with a manifest that ``rerun`` can reproduce.
"""
import argparse
import logging
import sys
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional

from src.pipeline.manifest import (
    build_manifest,
    compare_outputs,
    load_manifest,
    surface_changed,
    write_manifest,
)
from src.pipeline.runner import COMMANDS, resolve_surface_path
from src.pipeline.settings import RunConfig, load_run_config, parse_run_config
from src.utils.config import get_config, get_run_defaults, init_config, validate_config
from src.utils.errors import ConfigError, PipelineError, ThreeBodyError
from src.utils.exports import ArtifactWriter

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

logger = logging.getLogger(__name__)


def configure_logging(verbose: bool = False) -> None:
    """Configure root logging once, on stdout."""
    name = str(get_config("THREEBODY_LOG_LEVEL", "INFO")).upper()
    level = logging.DEBUG if verbose else getattr(logging, name, None)
    logging.basicConfig(
        level=level if isinstance(level, int) else logging.INFO,
        format=LOG_FORMAT,
        handlers=[
            logging.StreamHandler(sys.stdout),
        ],
        force=True,
    )


def _global_flags(default: Any = None) -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=default, help="Run config JSON file")
    common.add_argument(
        "--out-dir", type=str, default=default, help="Directory for artifacts and the manifest"
    )
    common.add_argument(
        "--threads", type=int, default=default, help="Worker processes for map sweeps"
    )
    common.add_argument("--seed", type=int, default=default, help="Seed for randomized defaults")
    common.add_argument(
        "--verbose", action="store_true", default=default or False, help="Log at DEBUG level"
    )
    return common


def _start_flags() -> argparse.ArgumentParser:
    start = argparse.ArgumentParser(add_help=False)
    start.add_argument("--energy", type=float, help="Collision energy E_k in eV")
    start.add_argument("--x2", type=float, dest="x2_0", help="Initial transverse offset")
    start.add_argument("--surface", type=str, help="Surface definition file")
    return start


def setup_parser() -> argparse.ArgumentParser:
    """Set up command-line argument parser."""
    # Global flags may also follow the subcommand; there they must not reset earlier values
    common = _global_flags(argparse.SUPPRESS)
    start = _start_flags()
    parser = argparse.ArgumentParser(
        description="Collinear three-body scattering", parents=[_global_flags()], allow_abbrev=False
    )

    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    def add(name: str, help_text: str, *parents: argparse.ArgumentParser):
        return subparsers.add_parser(
            name, help=help_text, parents=[common, *parents], allow_abbrev=False
        )

    # Single trajectory
    traj_parser = add("trajectory", "Integrate and classify one trajectory", start)
    traj_parser.add_argument("--rtol", type=float, help="Relative integration tolerance")
    traj_parser.add_argument("--atol", type=float, help="Absolute integration tolerance")

    # Internal time
    add("itime", "Internal time of one trajectory and the ray frequency profile", start)

    # Auxiliary oscillator
    osc_parser = add("oscillator", "Solve the auxiliary oscillator on a frequency profile", start)
    source = osc_parser.add_mutually_exclusive_group()
    source.add_argument(
        "--profile",
        choices=["constant", "sudden-jump", "tanh", "random-smooth"],
        help="Named analytic profile",
    )
    source.add_argument("--profile-file", type=str, help="Tabulated profile CSV")

    # Transition probabilities
    trans_parser = add("transitions", "Transition probability matrix", start)
    trans_parser.add_argument("--rho", type=float, help="Reflection coefficient to use directly")
    trans_parser.add_argument("--n-max", type=int, help="Largest vibrational quantum number")
    trans_parser.add_argument(
        "--variant", choices=["frozen", "literal"], help="Legendre argument variant"
    )
    trans_parser.add_argument(
        "--oracle", action="store_true", default=None, help="Also run the number-state evolution"
    )

    # Outcome maps
    for name, help_text in (
        ("map", "Outcome map over collision energy and transverse offset"),
        ("selfsim", "Outcome map and one recomputed zoom level"),
    ):
        map_parser = add(name, help_text)
        map_parser.add_argument("--surface", type=str, help="Surface definition file")
        map_parser.add_argument(
            "--resolution", type=int, nargs=2, metavar=("N_E", "N_X2"), help="Cells per axis"
        )

    # Lyapunov exponent
    lyap_parser = add("lyapunov", "Largest Lyapunov exponent", start)
    lyap_parser.add_argument("--s-total", type=float, help="Arclength to integrate")

    # End to end
    add("pipeline", "Trajectory through transition probabilities for one start", start)

    # Reproduce a previous run
    rerun_parser = subparsers.add_parser(
        "rerun", help="Re-run a manifest and compare output hashes", parents=[common]
    )
    rerun_parser.add_argument("manifest", type=str, help="manifest.json of a previous run")

    return parser


def collect_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Map parsed flags onto the run config tree; unset flags stay None."""
    flags = vars(args)
    get = flags.get
    resolution = get("resolution")
    return {
        "out_dir": get("out_dir"),
        "threads": get("threads"),
        "seed": get("seed"),
        "surface": get("surface"),
        "energy": get("energy"),
        "x2_0": get("x2_0"),
        "integrator": {"rtol": get("rtol"), "atol": get("atol")},
        "oscillator": {"profile": get("profile"), "profile_file": get("profile_file")},
        "transitions": {
            "rho": get("rho"),
            "n_max": get("n_max"),
            "variant": get("variant"),
            "oracle": get("oracle"),
        },
        "map": {"resolution": list(resolution) if resolution else None},
        "lyapunov": {"s_total": get("s_total")},
    }


def execute(command: str, config: RunConfig, out_dir: Path) -> ArtifactWriter:
    """
    Run one subcommand and write its manifest.

    Args:
        command: Subcommand name
        config: Resolved run config
        out_dir: Output directory

    Returns:
        ArtifactWriter: The writer holding every produced file
    """
    writer = ArtifactWriter(out_dir)
    logger.info(f"Running '{command}' into {out_dir}")
    summary = COMMANDS[command](config, writer)
    manifest = build_manifest(
        command, resolve_surface_path(config), config.model_dump(mode="json"), writer
    )
    write_manifest(manifest, writer)
    logger.info(f"'{command}' wrote {len(manifest.outputs)} file(s): {sorted(summary)}")
    return writer


def rerun(manifest_path: str, out_dir: Optional[str]) -> int:
    """
    Reproduce a manifest and compare output hashes.

    Returns:
        int: EXIT_OK when every output matches, EXIT_MISMATCH otherwise
    """
    manifest = load_manifest(manifest_path)
    if surface_changed(manifest):
        logger.warning(f"Surface file {manifest.surface.path} changed since the recorded run")
    parameters = dict(manifest.parameters)

    def reproduce(target: Path) -> List[str]:
        parameters["out_dir"] = str(target)
        config = parse_run_config(parameters)
        writer = execute(manifest.command, config, target)
        return compare_outputs(manifest, writer.hashes(exclude=["manifest.json"]))

    if out_dir:
        problems = reproduce(Path(out_dir))
    else:
        with tempfile.TemporaryDirectory(prefix="threebody-rerun-") as scratch:
            problems = reproduce(Path(scratch))

    if problems:
        for line in problems:
            logger.error(f"Mismatch: {line}")
        return EXIT_MISMATCH
    logger.info(f"Rerun of {manifest_path} reproduced all {len(manifest.outputs)} output(s)")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    # Initialize configuration
    init_config()

    # Set up argument parser
    parser = setup_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)

    problem = validate_config()
    if problem:
        logger.error(f"Invalid environment configuration: {problem}")
        return EXIT_CONFIG

    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG

    # Execute command
    try:
        if args.command == "rerun":
            return rerun(args.manifest, args.out_dir)

        config = load_run_config(args.config, collect_overrides(args))
        execute(args.command, config, Path(config.out_dir or get_run_defaults()["out_dir"]))

    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        for line in e.diagnostics:
            print(line, file=sys.stderr)
        return EXIT_CONFIG
    except PipelineError as e:
        logger.error(f"Stage '{e.stage}' failed: {e}")
        return EXIT_NUMERICAL
    except ThreeBodyError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_NUMERICAL

    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
