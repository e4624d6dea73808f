"""Benjamin-Ono flow, its frequency truncation and the rescaled field Y~.

The equation is ``U_t = (g^2/c^3) H U_xx + lam U U_x``. The dispersive part
has the purely imaginary symbol ``i d k|k|`` (``d = g^2/c^3``) and is
integrated exactly; the quadratic term is stepped with classical RK4 in the
integrating-factor frame.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as K
from .params import PhysParams
from .spectral import Grid, HoloField, RealField, SpectralField, make_grid, norm

BO_LENGTH = 2 * np.pi * 64
BO_POINTS = 8192


class CFLViolation(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BOState:
    U: RealField
    t: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.U.grid

    @classmethod
    def from_spectrum(cls, grid: Grid, spec, t: float = 0.0) -> "BOState":
        return cls(RealField(grid, spec), float(t))


@dataclass(frozen=True, eq=False)
class TruncatedBO:
    """U~ = P_{<=K} U with the forcing f~ it picks up, at BO time ``t``."""

    U: RealField
    f: RealField
    cutoff: float
    t: float = 0.0
    Ut: RealField | None = None  # exact time derivative of U~, if known


@dataclass(frozen=True, eq=False)
class YEpsField:
    """Rescaled, projected, velocity-shifted field on the water-wave grid."""

    Y: HoloField
    t: float
    eps: float
    Yt: HoloField | None = None
    f: HoloField | None = None

    @property
    def grid(self) -> Grid:
        return self.Y.grid


@dataclass
class BORun:
    states: list
    report: dict = field(default_factory=dict)
    steps: int = 0


# ---------------------------------------------------------------------------
# right side and stepping

def _bo_symbol(grid: Grid, p: PhysParams) -> np.ndarray:
    k = grid.k
    return 1j * p.dispersion * k * np.abs(k)


def _nonlinear(grid: Grid, spec: np.ndarray, lam: float) -> np.ndarray:
    u = grid.to_samples(spec).real
    ux = grid.to_samples(1j * grid.k * spec).real
    return lam * np.where(grid.dealias_mask, grid.to_spectrum(u * ux), 0.0)


def bo_rhs(s: BOState, p: PhysParams) -> RealField:
    """(g^2/c^3) H U_xx + lam U U_x with the product dealiased."""
    spec = s.U.spectrum
    out = _bo_symbol(s.grid, p) * spec + _nonlinear(s.grid, spec, p.lam)
    return RealField(s.grid, out)


def bo_cfl_dt(s: BOState, p: PhysParams) -> float:
    v = abs(p.lam) * float(np.max(np.abs(s.U.samples)))
    return np.inf if v == 0 else s.grid.spacing / v


def _if_rk4_diag(spec, h, E, E2, N):
    k1 = N(spec)
    k2 = N(E2 * (spec + 0.5 * h * k1))
    k3 = N(E2 * spec + 0.5 * h * k2)
    k4 = N(E * spec + h * E2 * k3)
    return E * spec + (h / 6.0) * (E * k1 + 2.0 * E2 * (k2 + k3) + k4)


def bo_step(s: BOState, dt: float, p: PhysParams) -> BOState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if dt > bo_cfl_dt(s, p):
        raise CFLViolation(f"dt = {dt} exceeds CFL bound dx/max|lam U| = {bo_cfl_dt(s, p):.3e}")
    grid = s.grid
    sym = _bo_symbol(grid, p)
    E, E2 = np.exp(sym * dt), np.exp(sym * 0.5 * dt)
    spec = _if_rk4_diag(s.U.spectrum, dt, E, E2, lambda v: _nonlinear(grid, v, p.lam))
    if not np.all(np.isfinite(spec)):
        raise FloatingPointError(f"non-finite BO state at t = {s.t + dt:.6g}")
    return BOState(_real(grid, spec), s.t + dt)


def _real(grid: Grid, spec) -> RealField:
    # round-off leaves a tiny asymmetry; restore exact conjugate symmetry
    mirror = np.conj(spec[(-grid.index) % grid.n])
    return RealField(grid, 0.5 * (spec + mirror))


def _conservation(U: RealField, m: int) -> dict:
    return {"mean": U.mean.real, "L2": norm(U, "L2"), "Hm": norm(U, "H", m)}


def bo_run(s0: BOState, t_final: float, p: PhysParams, checkpoints: Sequence[float] = (),
           dt: float = 0.01, m: int = 3) -> BORun:
    """March to ``t_final`` hitting each checkpoint exactly.

    The report holds drift of the mean (absolute), the L2 norm and the H^m
    norm (both relative) over the recorded states.
    """
    from .wavetank import _schedule

    if t_final < s0.t:
        raise ValueError("t_final precedes the initial time")
    grid = s0.grid
    sym = _bo_symbol(grid, p)
    N = lambda v: _nonlinear(grid, v, p.lam)
    cache = {}
    states = [s0]
    spec = s0.U.spectrum
    nsteps = 0
    plan = _schedule(s0.t, t_final, checkpoints, dt) if t_final > s0.t else []
    for mark, n, h in plan:
        key = round(h, 15)
        if key not in cache:
            cache[key] = (np.exp(sym * h), np.exp(sym * 0.5 * h))
        E, E2 = cache[key]
        for _ in range(n):
            vmax = abs(p.lam) * float(np.max(np.abs(grid.to_samples(spec))))
            if vmax > 0 and h * vmax > grid.spacing:
                raise CFLViolation(f"step {h:.3e} exceeds CFL bound {grid.spacing / vmax:.3e}")
            spec = _if_rk4_diag(spec, h, E, E2, N)
            nsteps += 1
        if not np.all(np.isfinite(spec)):
            raise FloatingPointError(f"non-finite BO state before t = {mark:.6g}")
        states.append(BOState(_real(grid, spec), mark))
    c0 = _conservation(s0.U, m)
    rows = [_conservation(s.U, m) for s in states]
    report = {
        "mean_drift": max(abs(r["mean"] - c0["mean"]) for r in rows),
        "L2_drift": max(abs(r["L2"] - c0["L2"]) for r in rows) / max(c0["L2"], 1e-300),
        "Hm_drift": max(abs(r["Hm"] - c0["Hm"]) for r in rows) / max(c0["Hm"], 1e-300),
        "m": m,
    }
    return BORun(states=states, report=report, steps=nsteps)


def proj_bo_rhs(z: HoloField, p: PhysParams) -> HoloField:
    """Right side of the evolution of z = -i P U.

    (i d_t + d dx^2) z = lam (-z z_x + P[z conj(z_x) + conj(z) z_x]).
    """
    grid = z.grid
    zs = z.samples
    zx = grid.to_samples(K.deriv(grid, z.spectrum))
    quad = grid.to_spectrum(-zs * zx)
    mixed = K.proj(grid, grid.to_spectrum(zs * np.conj(zx) + np.conj(zs) * zx))
    nl = np.where(grid.holo_mask, quad, 0.0) + mixed
    out = 1j * p.dispersion * K.deriv(grid, z.spectrum, 2) - 1j * p.lam * nl
    return HoloField(grid, np.where(grid.holo_mask, out, 0.0))


def project_state(U: SpectralField) -> HoloField:
    """z = -i P U, from which U = -2 Im z for zero-mean real U."""
    return HoloField(U.grid, K.proj(U.grid, -1j * U.spectrum))


# ---------------------------------------------------------------------------
# initial data

def bump_spectrum(k: np.ndarray, x0: float, width: float) -> np.ndarray:
    """Transform of the periodized odd bump centred at x0 (up to a constant).

    The bump is the derivative of a Matern-type profile with transform
    (1 + width^2 k^2)^-3, so it has zero mean and lies in H^s for s < 9/2.
    """
    kw = width * k
    return 1j * kw * (1.0 + kw ** 2) ** -3 * np.exp(-1j * k * x0)


def default_initial_data(grid: Grid, m: int = 3, seed: int = 0, bumps: int = 3,
                         widths: tuple[float, float] = (6.0, 10.0)) -> BOState:
    """Sum of seeded bumps (centres, widths, signed amplitudes), unit H^m norm.

    The spectrum peaks near |k| ~ 0.45 / width and decays algebraically, so
    the truncation errors at b/eps stay well above round-off.
    """
    rng = np.random.default_rng(seed)
    L = grid.length
    spec = np.zeros(grid.n, dtype=complex)
    for _ in range(bumps):
        x0 = L * (0.4 + 0.2 * rng.random())
        w = widths[0] + (widths[1] - widths[0]) * rng.random()
        amp = rng.choice([-1.0, 1.0]) * (0.5 + rng.random())
        spec += amp * bump_spectrum(grid.k, x0, w)
    spec = np.where(grid.dealias_mask, spec, 0.0)
    spec[0] = 0.0
    f = RealField(grid, spec)
    return BOState(_real(grid, spec / norm(f, "H", m)), 0.0)


def default_bo_grid(n: int = BO_POINTS, length: float = BO_LENGTH) -> Grid:
    return make_grid(n, length)


# ---------------------------------------------------------------------------
# truncation

def _check_cutoff(grid: Grid, K_: float):
    if K_ >= grid.kmax * (2.0 / 3.0):
        raise ValueError(f"cutoff {K_:.4g} is not resolved by the grid (dealiased kmax {grid.kmax * 2 / 3:.4g})")


def truncate(s: BOState, p: PhysParams) -> TruncatedBO:
    """U~ = P_{<= b/eps} U and f~ = P_{<= b/eps}(lam U U_x) - lam U~ U~_x."""
    grid = s.grid
    K_ = p.cutoff
    _check_cutoff(grid, K_)
    keep = np.abs(grid.k) <= K_ * (1 + 1e-12)
    spec = s.U.spectrum
    Ut = np.where(keep, spec, 0.0)
    full = _nonlinear(grid, spec, p.lam)
    # U~ U~_x is supported in |k| <= 2K; outside that only round-off remains
    low = np.where(np.abs(grid.k) <= 2 * K_ * (1 + 1e-12), _nonlinear(grid, Ut, p.lam), 0.0)
    f = np.where(keep, full, 0.0) - low
    dUt = np.where(keep, _bo_symbol(grid, p) * spec + full, 0.0)
    return TruncatedBO(_real(grid, Ut), _real(grid, f), K_, s.t, _real(grid, dUt))


# ---------------------------------------------------------------------------
# the field Y~ on the water-wave grid

def ww_grid_for(bo_grid: Grid, p: PhysParams, min_points: int = 64) -> Grid:
    """Smallest grid of period L/eps whose 2/3 band holds products of Y~.

    The top retained BO index j = floor(K L / 2 pi) maps to the same index on
    the water-wave grid; quadratic terms reach 2 j, which must stay in the band.
    """
    j = int(np.floor(p.cutoff * bo_grid.length / (2 * np.pi) + 1e-9))
    n = min_points
    while n // 3 < 2 * j:
        n *= 2
    return make_grid(n, bo_grid.length / p.eps)


def _map_spectrum(bo_grid: Grid, spec: np.ndarray, grid: Grid) -> np.ndarray:
    """Copy nonpositive BO modes to the same indices on ``grid``, halving the mean."""
    out = np.zeros(grid.n, dtype=complex)
    idx = bo_grid.index
    sel = (idx <= 0) & (spec != 0)
    j = idx[sel]
    if j.size and (-j.min()) > grid.n // 3:
        raise ValueError(f"target grid cannot represent BO index {j.min()} inside its band")
    vals = spec[sel] * np.where(j == 0, 0.5, 1.0)
    out[j % grid.n] = vals
    return out


def build_tilde_Y(tb: TruncatedBO, p: PhysParams, grid: Grid, t: float | None = None) -> YEpsField:
    """Y~(t, x) = -i P[eps U~(eps^2 t, eps (x - (g/c) t))] on ``grid``.

    ``grid`` must have period L/eps. If the truncated state carries its time
    derivative, the chain rule gives Y~_t exactly.
    """
    bo_grid = tb.U.grid
    if not np.isclose(grid.length * p.eps, bo_grid.length, rtol=1e-12):
        raise ValueError(f"target period {grid.length:.6g} is not L/eps = {bo_grid.length / p.eps:.6g}")
    eps = p.eps
    if t is None:
        t = tb.t / eps ** 2
    elif not np.isclose(t * eps ** 2, tb.t, rtol=1e-12, atol=1e-14):
        raise ValueError(f"time {t} does not correspond to BO time {tb.t}")
    kappa = grid.k  # on the target grid, index j has wavenumber eps * kappa_j
    phase = np.exp(-1j * kappa * p.group_velocity * t)
    Y = -1j * eps * phase * _map_spectrum(bo_grid, tb.U.spectrum, grid)
    Yt = None
    if tb.Ut is not None:
        dU = _map_spectrum(bo_grid, tb.Ut.spectrum, grid)
        Yt = -1j * eps ** 3 * phase * dU - 1j * kappa * p.group_velocity * Y
        Yt = HoloField(grid, Yt)
    f = HoloField(grid, -1j * eps ** 3 * phase * _map_spectrum(bo_grid, tb.f.spectrum, grid))
    return YEpsField(HoloField(grid, Y), float(t), eps, Yt, f)


def tilde_Y_operator(Y: np.ndarray, grid: Grid, p: PhysParams) -> np.ndarray:
    """Right side of the velocity-shifted projected BO equation, without forcing."""
    g, c = p.g, p.c
    d1 = K.deriv(grid, Y)
    ys, yx = grid.to_samples(Y), grid.to_samples(d1)
    quad = np.where(grid.holo_mask, grid.to_spectrum(ys * yx), 0.0)
    m1 = K.proj(grid, grid.to_spectrum(np.conj(ys) * yx))
    m2 = K.proj(grid, grid.to_spectrum(ys * np.conj(yx)))
    lin = -p.group_velocity * d1 + 1j * (g ** 2 / c ** 3) * K.deriv(grid, Y, 2)
    return lin + 1j * c * quad - 1j * c * m1 - 1j * c * m2


def fd_time_derivative(prev: YEpsField, nxt: YEpsField, tol: float = 1e-3) -> np.ndarray:
    """Central difference of two neighbouring fields, with an error guard.

    The error estimate compares the difference quotient with the mean of the
    two endpoint derivatives when those are known; otherwise the relative
    change between the neighbours is used.
    """
    h = nxt.t - prev.t
    if not h > 0:
        raise ValueError("neighbouring fields must be ordered in time")
    dq = (nxt.Y.spectrum - prev.Y.spectrum) / h
    if prev.Yt is not None and nxt.Yt is not None:
        ref = 0.5 * (prev.Yt.spectrum + nxt.Yt.spectrum)
        est = np.linalg.norm(dq - ref) / max(np.linalg.norm(ref), 1e-300)
    else:
        est = np.linalg.norm(nxt.Y.spectrum - prev.Y.spectrum) / max(np.linalg.norm(prev.Y.spectrum), 1e-300)
    if est > tol:
        raise ValueError(f"checkpoint spacing too coarse: relative FD error estimate {est:.2e} > {tol:g}")
    return dq


def tilde_Y_residual(y: YEpsField, p: PhysParams, neighbours: tuple | None = None) -> HoloField:
    """f~^eps = Y~_t + (g/c) Y~_a - i (g^2/c^3) Y~_aa - ic Y~ Y~_a + ic P[conj Y~ Y~_a] + ic P[Y~ conj Y~_a].

    The time derivative comes from the chain rule when available, otherwise
    from the two neighbouring fields in ``neighbours``.
    """
    grid = y.grid
    if y.Yt is not None:
        Yt = y.Yt.spectrum
    elif neighbours is not None:
        Yt = fd_time_derivative(*neighbours)
    else:
        raise ValueError("no time derivative: pass neighbouring fields for finite differencing")
    res = Yt - tilde_Y_operator(y.Y.spectrum, grid, p)
    return HoloField(grid, np.where(grid.holo_mask, res, 0.0))


def frequency_support(y: YEpsField, rel: float = 0.0) -> tuple[float, float]:
    """Range of wavenumbers carrying |coefficient| > rel * max."""
    a = np.abs(y.Y.spectrum)
    sel = a > rel * a.max() if a.max() > 0 else np.zeros_like(a, dtype=bool)
    if not sel.any():
        return (0.0, 0.0)
    k = y.grid.k[sel]
    return float(k.min()), float(k.max())
