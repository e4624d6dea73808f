"""CSV records and JSON manifests under a run directory.

Rows are appended and flushed one at a time, so a killed sweep leaves every
finished row on disk; resuming skips the eps values already recorded with
the same config hash.
"""
from __future__ import annotations

import csv
import json
import os
import platform
from pathlib import Path

import numpy as np

from .. import __version__
from .config import RunConfig, config_hash

ENV_OUTPUT_ROOT = "BOWAVE_OUTPUT_ROOT"


def output_dir(cfg: RunConfig) -> Path:
    """Run directory: ``cfg.output_dir`` under $BOWAVE_OUTPUT_ROOT (default: cwd)."""
    root = os.environ.get(ENV_OUTPUT_ROOT)
    out = Path(cfg.output_dir)
    if root:
        out = Path(root) / out if not out.is_absolute() else Path(root) / out.name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


class RecordStore:
    """Append-only CSV for one command; every row carries the config hash."""

    def __init__(self, directory: Path, command: str, cfg: RunConfig, columns: list[str]):
        self.dir = Path(directory)
        self.command = command
        self.cfg = cfg
        self.hash = config_hash(cfg)
        self.columns = ["config_hash"] + list(columns)
        self.csv_path = self.dir / f"{command}.csv"
        self.manifest_path = self.dir / f"{command}.manifest.json"
        self._check_header()

    def _check_header(self):
        if not self.csv_path.exists():
            return
        with self.csv_path.open(newline="") as fh:
            header = next(csv.reader(fh), None)
        if header != self.columns:
            # a different layout cannot be resumed; start over
            self.csv_path.unlink()

    def rows(self) -> list[dict]:
        """Rows written under the current config hash."""
        if not self.csv_path.exists():
            return []
        with self.csv_path.open(newline="") as fh:
            return [r for r in csv.DictReader(fh) if r["config_hash"] == self.hash]

    def completed(self, key: str = "eps") -> set[str]:
        return {r[key] for r in self.rows() if r.get("status") == "ok"}

    def drop(self, key: str, value: str):
        """Remove rows of the current hash with ``key == value`` (stale partial results)."""
        if not self.csv_path.exists():
            return
        with self.csv_path.open(newline="") as fh:
            keep = [r for r in csv.DictReader(fh) if not (r["config_hash"] == self.hash and r[key] == value)]
        self._rewrite(keep)

    def _rewrite(self, rows):
        tmp = self.csv_path.with_name(self.csv_path.name + ".tmp")
        with tmp.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=self.columns)
            w.writeheader()
            w.writerows(rows)
        os.replace(tmp, self.csv_path)

    def append(self, rows: list[dict]):
        new = not self.csv_path.exists()
        with self.csv_path.open("a", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=self.columns)
            if new:
                w.writeheader()
            for r in rows:
                missing = set(self.columns) - {"config_hash"} - set(r)
                if missing:
                    raise KeyError(f"record lacks columns {sorted(missing)}")
                w.writerow({"config_hash": self.hash, **{k: _fmt(r[k]) for k in self.columns[1:]}})
            fh.flush()
            os.fsync(fh.fileno())

    def write_manifest(self, summary: dict, files: list[str] | None = None) -> Path:
        man = {
            "command": self.command,
            "config_hash": self.hash,
            "config": self.cfg.model_dump(mode="json"),
            "package_version": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
            "records": self.csv_path.name,
            "files": sorted(files or []),
            "summary": summary,
        }
        tmp = self.manifest_path.with_name(self.manifest_path.name + ".tmp")
        tmp.write_text(json.dumps(man, indent=2, sort_keys=True, default=_json_default))
        os.replace(tmp, self.manifest_path)
        return self.manifest_path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
