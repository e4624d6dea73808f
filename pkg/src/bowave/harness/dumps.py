"""Binary spectrum dumps with a versioned JSON sidecar.

``name.bin`` holds the raw little-endian complex128 spectra back to back;
``name.json`` describes them (grid, time, parameters, field layout, checksum).
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..bo import BOState
from ..params import PhysParams
from ..spectral import make_grid
from ..wavetank import WWState

FORMAT = "bowave-spectrum-dump"
VERSION = 1
DTYPE = "<c16"


class DumpError(ValueError):
    pass


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(".json")


def _atomic_write(path: Path, data: bytes):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def save_state(path: str | Path, state, p: PhysParams | None = None, extra: dict | None = None) -> Path:
    """Write ``state`` (WWState or BOState) to ``path`` and its sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(state, WWState):
        kind, fields = "ww", {"W": state.W.spectrum, "Q": state.Q.spectrum}
    elif isinstance(state, BOState):
        kind, fields = "bo", {"U": state.U.spectrum}
    else:
        raise TypeError(f"cannot dump {type(state).__name__}")
    grid = state.grid
    blob = b"".join(np.ascontiguousarray(v, dtype=DTYPE).tobytes() for v in fields.values())
    meta = {
        "format": FORMAT,
        "version": VERSION,
        "kind": kind,
        "n": grid.n,
        "length": grid.length,
        "t": float(state.t),
        "dtype": DTYPE,
        "fields": list(fields),
        "sha256": hashlib.sha256(blob).hexdigest(),
        "params": asdict(p) if p is not None else None,
        "extra": extra or {},
    }
    _atomic_write(path, blob)
    _atomic_write(sidecar_path(path), json.dumps(meta, indent=2, sort_keys=True).encode())
    return path


def read_meta(path: str | Path) -> dict:
    side = sidecar_path(path)
    if not side.exists():
        raise DumpError(f"missing sidecar {side}")
    meta = json.loads(side.read_text())
    if meta.get("format") != FORMAT:
        raise DumpError(f"{side}: not a {FORMAT} sidecar")
    if meta.get("version") != VERSION:
        raise DumpError(f"{side}: unsupported dump version {meta.get('version')} (reader is {VERSION})")
    return meta


def load_state(path: str | Path):
    """Inverse of :func:`save_state`; returns (state, params or None, meta)."""
    path = Path(path)
    if not path.exists():
        raise DumpError(f"dump not found: {path}")
    meta = read_meta(path)
    blob = path.read_bytes()
    if hashlib.sha256(blob).hexdigest() != meta["sha256"]:
        raise DumpError(f"{path}: checksum mismatch")
    n = meta["n"]
    arr = np.frombuffer(blob, dtype=meta["dtype"]).astype(complex)
    if arr.size != n * len(meta["fields"]):
        raise DumpError(f"{path}: expected {n * len(meta['fields'])} values, found {arr.size}")
    parts = dict(zip(meta["fields"], arr.reshape(len(meta["fields"]), n)))
    grid = make_grid(n, meta["length"])
    if meta["kind"] == "ww":
        state = WWState.from_spectra(grid, parts["W"], parts["Q"], meta["t"])
    elif meta["kind"] == "bo":
        state = BOState.from_spectrum(grid, parts["U"], meta["t"])
    else:
        raise DumpError(f"{path}: unknown kind {meta['kind']!r}")
    p = PhysParams(**meta["params"]) if meta.get("params") else None
    return state, p, meta
