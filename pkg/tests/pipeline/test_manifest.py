"""
Tests for run manifests.
"""
import json
import shutil
import tempfile
from pathlib import Path
from unittest import TestCase

import pytest

from src import __version__
from src.pipeline.manifest import (
    MANIFEST_NAME,
    build_manifest,
    compare_outputs,
    load_manifest,
    surface_changed,
    write_manifest,
)
from src.utils.config import CONFIG_DIR
from src.utils.errors import ConfigError
from src.utils.exports import ArtifactWriter, sha256_file


class TestManifest(TestCase):
    """Test cases for building, writing and comparing manifests."""

    def setUp(self):
        """Set up a writer with two artifacts and a private surface copy."""
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.surface = self.dir / "surface.json"
        shutil.copy(CONFIG_DIR / "surfaces" / "separable_eckart.json", self.surface)
        self.writer = ArtifactWriter(self.dir / "out")
        self.writer.write_text("a.txt", "alpha\n")
        self.writer.write_json("b.json", {"value": 1})

    def tearDown(self):
        """Remove the scratch directory."""
        self.tmp.cleanup()

    def test_build_and_reload(self):
        """Test that a written manifest reloads with the same content."""
        manifest = build_manifest("trajectory", self.surface, {"energy": 1.5}, self.writer)
        path = write_manifest(manifest, self.writer)

        loaded = load_manifest(path)

        self.assertEqual(path.name, MANIFEST_NAME)
        self.assertEqual(loaded.command, "trajectory")
        self.assertEqual(loaded.package_version, __version__)
        self.assertEqual(loaded.surface.sha256, sha256_file(self.surface))
        self.assertEqual(set(loaded.outputs), {"a.txt", "b.json"})
        self.assertEqual(loaded.parameters, {"energy": 1.5})

    def test_compare_outputs(self):
        """Test reporting of changed, missing and extra outputs."""
        manifest = build_manifest("map", self.surface, {}, self.writer)
        produced = dict(manifest.outputs)

        self.assertEqual(compare_outputs(manifest, produced), [])

        produced["a.txt"] = "0" * 64
        del produced["b.json"]
        produced["c.csv"] = "1" * 64
        problems = compare_outputs(manifest, produced)

        self.assertEqual(len(problems), 3)
        self.assertTrue(problems[0].startswith("a.txt: sha256"))
        self.assertEqual(problems[1], "b.json: missing")
        self.assertEqual(problems[2], "c.csv: not in manifest")

    def test_surface_changed(self):
        """Test detection of an edited or deleted surface file."""
        manifest = build_manifest("map", self.surface, {}, self.writer)
        self.assertFalse(surface_changed(manifest))

        self.surface.write_text(self.surface.read_text() + "\n")
        self.assertTrue(surface_changed(manifest))

        self.surface.unlink()
        self.assertTrue(surface_changed(manifest))

    def test_invalid_manifests(self):
        """Test that missing or malformed manifests raise ConfigError."""
        malformed = self.dir / "bad.json"
        malformed.write_text("not json")
        incomplete = self.dir / "incomplete.json"
        incomplete.write_text(json.dumps({"command": "map"}))

        with pytest.raises(ConfigError):
            load_manifest(self.dir / "absent.json")
        with pytest.raises(ConfigError):
            load_manifest(malformed)
        with pytest.raises(ConfigError) as excinfo:
            load_manifest(incomplete)
        self.assertTrue(any(line.startswith("/surface") for line in excinfo.value.diagnostics))
