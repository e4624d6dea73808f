"""Run configuration: schema, loading and hashing."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..params import PhysParams


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ParamsConfig(_Strict):
    g: float = Field(1.0, gt=0)
    c: float = Field(1.0, gt=0)
    b: float = Field(1.0, gt=0)
    lam: float | None = None


class GridConfig(_Strict):
    bo_points: int = Field(8192, ge=64)
    bo_cycles: float = Field(64.0, gt=0, description="BO period in units of 2 pi")
    bo_dt: float = Field(0.005, gt=0)
    ww_min_points: int = Field(64, ge=16)
    ww_dt: float = Field(0.1, gt=0)

    @field_validator("bo_points", "ww_min_points")
    @classmethod
    def _pow2(cls, v):
        if v & (v - 1):
            raise ValueError(f"must be a power of two, got {v}")
        return v

    @property
    def bo_length(self) -> float:
        return 2 * np.pi * self.bo_cycles


class DataConfig(_Strict):
    bumps: int = Field(3, ge=1)
    widths: tuple[float, float] = (6.0, 10.0)

    @field_validator("widths")
    @classmethod
    def _widths(cls, v):
        if not 0 < v[0] <= v[1]:
            raise ValueError(f"widths must satisfy 0 < lo <= hi, got {v}")
        return v


class PerturbConfig(_Strict):
    deltas: list[float] = [0.5, 0.3]
    seed: int = 1


class RunConfig(_Strict):
    name: str = "main"
    params: ParamsConfig = ParamsConfig()
    epsilons: list[float] = [0.2, 0.14, 0.1, 0.07, 0.05]
    T: float = Field(0.5, gt=0)
    m: int = Field(3, ge=3)
    grid: GridConfig = GridConfig()
    checkpoints: list[float] = Field(default_factory=list, description="BO times in (0, T)")
    output_dir: str = "runs/main"
    seed: int = 0
    data: DataConfig = DataConfig()
    perturbation: PerturbConfig = PerturbConfig()

    @field_validator("epsilons")
    @classmethod
    def _eps(cls, v):
        if not v:
            raise ValueError("at least one epsilon is required")
        if any(not 0 < e < 1 for e in v):
            raise ValueError(f"epsilons must lie in (0, 1), got {v}")
        if any(a <= b for a, b in zip(v, v[1:])):
            raise ValueError(f"epsilons must be strictly decreasing, got {v}")
        return v

    @model_validator(mode="after")
    def _checkpoints(self):
        bad = [t for t in self.checkpoints if not 0 < t < self.T]
        if bad:
            raise ValueError(f"checkpoints must lie in (0, T = {self.T}), got {bad}")
        return self

    def phys(self, eps: float) -> PhysParams:
        p = self.params
        return PhysParams(g=p.g, c=p.c, eps=eps, b=p.b, T=self.T, lam=p.lam)

    @property
    def times(self) -> list[float]:
        """Recorded BO times: 0, the checkpoints and T."""
        return [0.0] + sorted(set(self.checkpoints)) + [self.T]


class ConfigError(ValueError):
    pass


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    try:
        raw = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"{path}: cannot parse: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        lines = [f"{path}: invalid config"]
        for e in exc.errors():
            loc = ".".join(str(x) for x in e["loc"]) or "<root>"
            lines.append(f"  {loc}: {e['msg']}")
        raise ConfigError("\n".join(lines)) from None


def config_hash(cfg: RunConfig) -> str:
    """Short sha256 of the canonical JSON form (output_dir excluded)."""
    d = cfg.model_dump(mode="json", exclude={"output_dir"})
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
