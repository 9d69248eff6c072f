#!/usr/bin/env python3
"""
Test runner script for the three-body scattering toolkit.

Runs pytest through uv, optionally restricted to one source package or to the
quick tests (everything not marked ``slow``).
"""
import argparse
import logging
import os
import subprocess
import sys
from pathlib import Path
from typing import List, Optional

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[logging.StreamHandler(sys.stdout)],
)
logger = logging.getLogger(__name__)

PACKAGES = ("scattering", "quantum", "chaos", "pipeline", "utils")


def build_command(
    targets: List[str], verbose: bool = True, coverage: bool = False, marker: Optional[str] = None
) -> List[str]:
    """
    Assemble the pytest command line.

    Args:
        targets: Test files or directories (empty for the whole suite)
        verbose: Whether to run tests in verbose mode
        coverage: Whether to generate coverage report for src
        marker: Optional -m expression

    Returns:
        List[str]: The command to run
    """
    cmd = ["uv", "run", "pytest"]
    cmd.append("-v" if verbose else "-q")
    if coverage:
        cmd.extend(["--cov=src", "--cov-report=term", "--cov-report=html"])
    if marker:
        cmd.extend(["-m", marker])
    cmd.extend(targets)
    return cmd


def main():
    """Main entry point."""
    parser = argparse.ArgumentParser(description="Run tests for the three-body scattering toolkit")
    parser.add_argument("test_path", nargs="?", help="Path to specific test file or directory")
    parser.add_argument(
        "--package", choices=PACKAGES, action="append", help="Only test these source packages"
    )
    parser.add_argument("-q", "--quiet", action="store_true", help="Run tests in quiet mode")
    parser.add_argument("--coverage", action="store_true", help="Generate coverage report")
    speed = parser.add_mutually_exclusive_group()
    speed.add_argument("--fast", action="store_true", help="Skip sweeps marked slow")
    speed.add_argument("--slow-only", action="store_true", help="Run only sweeps marked slow")

    args = parser.parse_args()

    # Ensure we're in the correct directory
    os.chdir(Path(__file__).parent)

    targets = [f"tests/{name}" for name in args.package or []]
    if args.test_path:
        targets.append(args.test_path)
    marker = "not slow" if args.fast else "slow" if args.slow_only else None
    cmd = build_command(targets, verbose=not args.quiet, coverage=args.coverage, marker=marker)

    logger.info(f"Running tests with command: {' '.join(cmd)}")
    try:
        subprocess.run(cmd, check=True)
    except subprocess.CalledProcessError as e:
        logger.error(f"Tests failed with exit code: {e.returncode}")
        sys.exit(e.returncode)


if __name__ == "__main__":
    main()
