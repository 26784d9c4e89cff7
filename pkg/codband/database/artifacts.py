"""
Artifact store
Run directories holding CSV tables, the JSON manifest, traces and event logs
"""

import json
import logging
import os
import shutil
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional

import pandas as pd

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"


class RunWriter:
    """Writes the files of one run into its staging directory"""

    def __init__(self, staging: Path, final: Path):
        self.staging = staging
        self.final = final
        self.files: List[str] = []

    def path(self, filename: str) -> Path:
        self.files.append(filename)
        return self.staging / filename

    def write_frame(self, filename: str, frame: pd.DataFrame) -> Path:
        path = self.path(filename)
        frame.to_csv(path, index=False)
        return self.final / filename

    def write_manifest(self, manifest: Dict[str, Any]) -> Path:
        manifest = dict(manifest, files=sorted(set(self.files) | {MANIFEST}))
        with open(self.staging / MANIFEST, "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2, sort_keys=True, default=str)
        return self.final / MANIFEST


class ArtifactStore:
    def __init__(self, root=None):
        """Store rooted at root, defaulting to CODBAND_OUTPUT_DIR"""
        self.root = Path(root if root is not None else os.getenv("CODBAND_OUTPUT_DIR", "results"))

    @contextmanager
    def open_run(self, name: str) -> Iterator[RunWriter]:
        """
        Stage a run's files and move them into place only when the block succeeds

        Args:
            name: Run directory name under the store root

        Yields:
            RunWriter for the staging directory
        """
        final = self.root / name
        staging = self.root / f".{name}.partial"
        if staging.exists():
            shutil.rmtree(staging)
        staging.mkdir(parents=True)
        try:
            yield RunWriter(staging, final)
        except BaseException:
            shutil.rmtree(staging, ignore_errors=True)
            raise
        if final.exists():
            shutil.rmtree(final)
        staging.rename(final)
        logger.info("wrote run %s", final)

    def list_runs(self) -> List[Dict[str, Any]]:
        """Manifests of every complete run, newest first"""
        if not self.root.is_dir():
            return []
        runs = []
        for path in self.root.iterdir():
            if path.is_dir() and (path / MANIFEST).is_file():
                manifest = self.load_manifest(path.name)
                manifest["run"] = path.name
                runs.append(manifest)
        return sorted(runs, key=lambda m: m.get("created_at", ""), reverse=True)

    def load_manifest(self, name: str) -> Dict[str, Any]:
        with open(self.root / name / MANIFEST, "r", encoding="utf-8") as f:
            return json.load(f)

    def load_frame(self, name: str, filename: str) -> Optional[pd.DataFrame]:
        path = self.root / name / filename
        if not path.is_file():
            return None
        return pd.read_csv(path)
