"""Least-squares power laws in log-log coordinates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PowerLaw:
    exponent: float
    intercept: float
    r2: float
    stderr: float
    npoints: int

    def __call__(self, x):
        return np.exp(self.intercept) * np.asarray(x, dtype=float) ** self.exponent


def fit_power_law(points) -> PowerLaw:
    """Fit value = C eps^p; returns exponent p, log C, R^2 and the slope's standard error."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (eps, value) pairs")
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points, got {len(pts)}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    if np.any(pts <= 0):
        raise ValueError("all eps and values must be positive")
    x, y = np.log(pts[:, 0]), np.log(pts[:, 1])
    if np.ptp(x) == 0:
        raise ValueError("eps values must not all coincide")
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - (slope * x + icpt)
    ss_res = float(res @ res)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    n = len(x)
    stderr = np.sqrt(ss_res / (n - 2) / ((x - x.mean()) ** 2).sum()) if n > 2 else np.nan
    return PowerLaw(float(slope), float(icpt), float(r2), float(stderr), n)
