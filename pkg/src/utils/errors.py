"""
Exception hierarchy shared by every stage of the toolkit.
"""
from typing import Any, List, Optional

from pydantic import ValidationError


class ThreeBodyError(Exception):
    """Base class for all toolkit errors."""


class DomainError(ThreeBodyError, ValueError):
    """Argument outside the mathematical or declared spatial domain."""


class ConfigError(ThreeBodyError):
    """Run config or surface file failed schema validation."""

    def __init__(self, message: str, diagnostics: Optional[List[str]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class TurningPointError(ThreeBodyError):
    """Evaluation requested where P0^2 <= 0."""


class SaddleConvergenceError(ThreeBodyError):
    """Saddle search did not converge to a non-degenerate stationary point."""


class WrongIndexError(ThreeBodyError):
    """Stationary point found, but it is a minimum or a maximum."""


class TruncationError(ThreeBodyError):
    """Steepest-descent path left the domain before reaching a channel asymptote."""


class TruncationDeficitError(ThreeBodyError):
    """Transition-matrix columns lose more probability than the configured bound."""


class IntegrationError(ThreeBodyError):
    """ODE integration failed; carries whatever was computed."""

    def __init__(self, message: str, partial: Any = None):
        super().__init__(message)
        self.partial = partial


class EnergyDriftError(IntegrationError):
    """Total energy drifted beyond the configured tolerance."""


class ClassificationError(ThreeBodyError):
    """Final state lies in an ambiguous region."""


class ProjectionError(ThreeBodyError):
    """Trajectory sample lies outside the tube around the extremal ray."""


class FrameBreakdownError(ThreeBodyError):
    """Ray-adapted metric became non-positive."""


class AsymptoteError(ThreeBodyError):
    """Frequency profile does not settle in its asymptotic tails."""


class MatchingError(ThreeBodyError):
    """Bogoliubov tail fit failed or produced unphysical coefficients."""


class CausticError(ThreeBodyError):
    """|xi| vanished where the wave function was requested."""


class OracleConvergenceError(ThreeBodyError):
    """Number-state evolution changed under basis doubling."""


class FitError(ThreeBodyError):
    """Too few usable scales for a box-counting fit."""


class InsufficientLengthError(ThreeBodyError):
    """Trajectory too short for a converged Lyapunov average."""


class PipelineError(ThreeBodyError):
    """A pipeline stage failed; records which one."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


def pointer_diagnostics(error: ValidationError) -> List[str]:
    """
    Format pydantic validation errors as one '/json/pointer: message' line each.

    Args:
        error: The pydantic ValidationError

    Returns:
        List[str]: Diagnostics in document order
    """
    lines = []
    for item in error.errors():
        pointer = "/" + "/".join(str(part) for part in item["loc"])
        lines.append(f"{pointer}: {item['msg']}")
    return lines
