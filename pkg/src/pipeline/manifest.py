#!/usr/bin/env python
"""
Run manifests: what was run, on which surface, and what it produced.
"""

import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src import __version__
from src.utils.errors import ConfigError, pointer_diagnostics
from src.utils.exports import ArtifactWriter, sha256_file

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


class SurfaceReference(BaseModel):
    model_config = ConfigDict(extra="forbid")

    path: str
    sha256: str


class RunManifest(BaseModel):
    """Everything needed to reproduce a run's outputs byte for byte."""

    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1] = 1
    command: str
    package_version: str = __version__
    surface: SurfaceReference
    parameters: Dict[str, Any]
    outputs: Dict[str, str] = Field(default_factory=dict, description="path -> sha256")
    created_at: str = Field(default="", description="UTC timestamp, ignored on rerun")


def build_manifest(
    command: str, surface_path: Union[str, Path], parameters: Dict[str, Any], writer: ArtifactWriter
) -> RunManifest:
    """
    Assemble the manifest of a finished run.

    Args:
        command: Subcommand that produced the outputs
        surface_path: Surface definition file used
        parameters: Fully resolved run config
        writer: Writer holding the produced files

    Returns:
        RunManifest: The manifest (not yet written)
    """
    return RunManifest(
        command=command,
        surface=SurfaceReference(path=str(surface_path), sha256=sha256_file(surface_path)),
        parameters=parameters,
        outputs=writer.hashes(exclude=[MANIFEST_NAME]),
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )


def write_manifest(manifest: RunManifest, writer: ArtifactWriter) -> Path:
    return writer.write_json(MANIFEST_NAME, manifest.model_dump(mode="json"))


def load_manifest(path: Union[str, Path]) -> RunManifest:
    """
    Read and validate a manifest file.

    Raises:
        ConfigError: If the file is missing or malformed
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
        return RunManifest.model_validate(data)
    except FileNotFoundError as e:
        raise ConfigError(f"manifest not found: {path}", [f"/: {path} does not exist"]) from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"manifest is not valid JSON: {path}", [f"/: {e}"]) from e
    except ValidationError as e:
        raise ConfigError("invalid manifest", pointer_diagnostics(e)) from e


def compare_outputs(expected: RunManifest, produced: Dict[str, str]) -> List[str]:
    """
    List differences between recorded and reproduced output hashes.

    Returns:
        List[str]: One line per missing, extra or changed file; empty when identical
    """
    problems = []
    for name, digest in sorted(expected.outputs.items()):
        if name not in produced:
            problems.append(f"{name}: missing")
        elif produced[name] != digest:
            problems.append(f"{name}: sha256 {produced[name][:12]} != {digest[:12]}")
    for name in sorted(set(produced) - set(expected.outputs)):
        problems.append(f"{name}: not in manifest")
    return problems


def surface_changed(manifest: RunManifest) -> bool:
    path = Path(manifest.surface.path)
    return not path.exists() or sha256_file(path) != manifest.surface.sha256
