#!/usr/bin/env python
"""
Artifact writing utilities.

Every file is written to a temporary sibling first and renamed into place, so a
failing run never leaves a partial artifact behind. Written files are recorded with
their SHA-256 so a run manifest can be assembled afterwards.
"""

import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.12g"


def sha256_file(path: Union[str, Path]) -> str:
    """Return the hex SHA-256 digest of a file."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _json_default(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def to_json_text(payload: Any) -> str:
    """Serialize a payload deterministically (sorted keys, fixed indent)."""
    return json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n"


def encode_pgm(image: np.ndarray) -> bytes:
    """
    Encode an 8-bit grayscale image as binary PGM (P5).

    Args:
        image: 2-D array of values in [0, 255]; row 0 is the first image row

    Returns:
        bytes: The encoded file content
    """
    data = np.asarray(image)
    if data.ndim != 2:
        raise ValueError(f"PGM image must be 2-D, got shape {data.shape}")
    if data.min(initial=0) < 0 or data.max(initial=0) > 255:
        raise ValueError("PGM values must lie in [0, 255]")
    height, width = data.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    return header + data.astype(np.uint8).tobytes()


def decode_pgm(content: bytes) -> np.ndarray:
    """Decode a binary PGM produced by encode_pgm."""
    parts = content.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5":
        raise ValueError("Not a binary PGM file")
    width, height = (int(v) for v in parts[1].split())
    pixels = np.frombuffer(parts[3], dtype=np.uint8, count=width * height)
    return pixels.reshape(height, width)


class ArtifactWriter:
    """Writes run artifacts atomically into one output directory."""

    def __init__(self, out_dir: Union[str, Path]):
        """
        Initialize the writer.

        Args:
            out_dir: Directory receiving all artifacts (created if missing)
        """
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.written: List[Dict[str, str]] = []

    def write_bytes(self, name: str, content: bytes) -> Path:
        """
        Atomically write raw bytes.

        Args:
            name: File name relative to the output directory
            content: Bytes to write

        Returns:
            Path: The final path of the artifact
        """
        target = self.out_dir / name
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(content)
            os.replace(tmp_name, target)
        except BaseException:
            if os.path.exists(tmp_name):
                os.remove(tmp_name)
            raise

        digest = hashlib.sha256(content).hexdigest()
        self.written = [entry for entry in self.written if entry["path"] != name]
        self.written.append({"path": name, "sha256": digest})
        logger.info(f"Wrote {target} ({len(content)} bytes)")
        return target

    def write_text(self, name: str, text: str) -> Path:
        """Atomically write UTF-8 text."""
        return self.write_bytes(name, text.encode("utf-8"))

    def write_json(self, name: str, payload: Any) -> Path:
        """Atomically write a JSON document with sorted keys."""
        return self.write_text(name, to_json_text(payload))

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        """Atomically write a DataFrame as CSV with a fixed float format."""
        text = frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
        return self.write_text(name, text)

    def write_pgm(self, name: str, image: np.ndarray) -> Path:
        """Atomically write an 8-bit binary PGM image."""
        return self.write_bytes(name, encode_pgm(image))

    def hashes(self, exclude: Optional[List[str]] = None) -> Dict[str, str]:
        """Return {path: sha256} for everything written so far."""
        skip = set(exclude or [])
        return {
            entry["path"]: entry["sha256"] for entry in self.written if entry["path"] not in skip
        }
