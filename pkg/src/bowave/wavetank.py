"""Constant-vorticity gravity water waves in holomorphic coordinates.

State variables are the interface parametrization ``W`` and the holomorphic
velocity potential ``Q``, both spectra on nonpositive modes. The linear part
``w_t = -q_a, q_t = i g w - i c q`` is integrated exactly per mode, and the
rest with the classical four-stage rule in the integrating-factor frame.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import _kernels as K
from .params import PhysParams
from .spectral import Grid, HoloField, RealField, SpectralField

DELTA_FLOOR = 0.1


class InvariantViolation(RuntimeError):
    """Raised when a state leaves the admissible set (degeneracy, Taylor sign)."""


class CFLViolation(ValueError):
    pass


# ---------------------------------------------------------------------------
# state types

@dataclass(frozen=True, eq=False)
class WWState:
    W: HoloField
    Q: HoloField
    t: float = 0.0

    def __post_init__(self):
        if self.W.grid != self.Q.grid:
            raise ValueError("W and Q live on different grids")

    @property
    def grid(self) -> Grid:
        return self.W.grid

    @classmethod
    def from_spectra(cls, grid: Grid, W, Q, t: float = 0.0) -> "WWState":
        return cls(HoloField(grid, W), HoloField(grid, Q), float(t))

    @classmethod
    def zeros(cls, grid: Grid) -> "WWState":
        z = np.zeros(grid.n, dtype=complex)
        return cls.from_spectra(grid, z, z)

    def scaled(self, a: float) -> "WWState":
        return WWState.from_spectra(self.grid, a * self.W.spectrum, a * self.Q.spectrum, self.t)


@dataclass(frozen=True, eq=False)
class AuxFields:
    J: RealField
    F: SpectralField
    F1: SpectralField
    Fu: SpectralField
    T1: SpectralField


@dataclass(frozen=True, eq=False)
class DiffState:
    """Differentiated variables Wd = W_a and R = Q_a / (1 + W_a), plus coefficients."""

    Wd: HoloField
    R: HoloField
    W: HoloField
    b: RealField | None = None
    b1: SpectralField | None = None
    bu: RealField | None = None
    a: RealField | None = None
    a1: RealField | None = None
    au: RealField | None = None
    N: RealField | None = None

    @property
    def grid(self) -> Grid:
        return self.Wd.grid


@dataclass(frozen=True, eq=False)
class LinState:
    w: HoloField
    r: HoloField
    t: float = 0.0


@dataclass
class RunResult:
    states: list
    monitors: list = field(default_factory=list)
    steps: int = 0


# ---------------------------------------------------------------------------
# auxiliary quantities

def _field(grid, samples, cls=SpectralField):
    if cls is RealField:
        return RealField.from_real_samples(grid, np.real(samples))
    return cls.from_samples(grid, samples)


def jacobian_min(s: WWState) -> float:
    grid = s.grid
    Wa = grid.to_samples(K.deriv(grid, s.W.spectrum))
    return float(np.min(np.abs(1.0 + Wa)))


def check_nondegenerate(s: WWState, floor: float = DELTA_FLOOR) -> float:
    m = jacobian_min(s)
    if not m > floor:
        raise InvariantViolation(f"interface degeneracy: min|1 + W_a| = {m:.3e} <= {floor}")
    return m


def ww_aux(s: WWState, p: PhysParams, floor: float = DELTA_FLOOR) -> AuxFields:
    check_nondegenerate(s, floor)
    grid = s.grid
    a = K.aux_fields(grid, s.W.spectrum, s.Q.spectrum, p.c)
    return AuxFields(
        J=_field(grid, a.J.v, RealField),
        F=_field(grid, a.F.v),
        F1=_field(grid, a.F1.v),
        Fu=_field(grid, a.Fu.v),
        T1=_field(grid, a.T1.v),
    )


def ww_rhs(s: WWState, p: PhysParams) -> tuple[HoloField, HoloField]:
    grid = s.grid
    dW, dQ = K.ww_rhs(grid, s.W.spectrum, s.Q.spectrum, p.g, p.c)
    return HoloField(grid, dW), HoloField(grid, dQ)


def omega_branches(xi, p: PhysParams):
    """Roots of tau^2 + c tau + g xi = 0 and the quadratic low-frequency fit.

    Returns ``(omega_plus, omega_minus, omega_0)``; ``xi`` must be <= 0.
    """
    xi = np.asarray(xi, dtype=float)
    if np.any(xi > 0):
        raise ValueError("dispersion branches are defined for xi <= 0 only")
    root = np.sqrt(p.c ** 2 + 4.0 * p.g * np.abs(xi))
    om_p = -0.5 * (p.c - root)
    om_m = -0.5 * (p.c + root)
    om_0 = -(p.g / p.c) * xi - (p.g ** 2 / p.c ** 3) * xi ** 2
    return om_p, om_m, om_0


def upper_branch_ratio(grid: Grid, p: PhysParams) -> np.ndarray:
    """Q/W ratio per mode on the upper branch: 2g / (c + sqrt(c^2 + 4g|k|))."""
    return 2.0 * p.g / (p.c + np.sqrt(p.c ** 2 + 4.0 * p.g * np.abs(grid.k)))


def linear_evolve(s0: WWState, t: float, p: PhysParams) -> WWState:
    """Exact flow of w_t + q_a = 0, q_t + icq - igw = 0."""
    prop = K.Propagator(s0.grid, p.g, p.c, t, include_mean=True)
    W, Q = prop(s0.W.spectrum, s0.Q.spectrum)
    return WWState.from_spectra(s0.grid, W, Q, s0.t + t)


# ---------------------------------------------------------------------------
# time stepping

def if_rk4(u, h: float, lin: Callable, E: Callable, E2: Callable, rhs: Callable):
    """One integrating-factor RK4 step for u' = M u + N(u).

    ``rhs`` is the full right side, ``lin`` applies M, ``E`` and ``E2`` apply
    exp(M h) and exp(M h/2). Works on tuples of arrays.
    """
    def N(v):
        r = rhs(v)
        m = lin(v)
        return tuple(a - b for a, b in zip(r, m))

    ax = lambda x, y, s: tuple(a + s * b for a, b in zip(x, y))
    k1 = N(u)
    k2 = N(E2(ax(u, k1, 0.5 * h)))
    Eu2 = E2(u)
    k3 = N(ax(Eu2, k2, 0.5 * h))
    k4 = N(ax(E(u), E2(k3), h))
    Ek1 = E(k1)
    Ek23 = E2(tuple(a + b for a, b in zip(k2, k3)))
    Eu = E(u)
    return tuple(eu + (h / 6.0) * (e1 + 2.0 * e23 + b4)
                 for eu, e1, e23, b4 in zip(Eu, Ek1, Ek23, k4))


def _pair_prop(P: K.Propagator):
    return lambda u: P(u[0], u[1])


def advection_speed(s: WWState, p: PhysParams) -> float:
    """max |b_|, the transport velocity of the differentiated system."""
    d = diff_aux(to_diff_vars(s, floor=0.0), p)
    return float(np.max(np.abs(d.bu.samples)))


def ww_cfl_dt(s: WWState, p: PhysParams, cfl: float = 0.5) -> float:
    v = advection_speed(s, p)
    return np.inf if v == 0 else cfl * s.grid.spacing / v


def ww_step(s: WWState, dt: float, p: PhysParams) -> WWState:
    """Single IF-RK4 step (no monitoring)."""
    grid = s.grid
    E = _pair_prop(K.Propagator(grid, p.g, p.c, dt))
    E2 = _pair_prop(K.Propagator(grid, p.g, p.c, 0.5 * dt))
    lin = lambda u: K.linear_apply(grid, u[0], u[1], p.g, p.c, include_mean=False)
    rhs = lambda u: K.ww_rhs(grid, u[0], u[1], p.g, p.c)
    W, Q = if_rk4((s.W.spectrum, s.Q.spectrum), dt, lin, E, E2, rhs)
    if not (np.all(np.isfinite(W)) and np.all(np.isfinite(Q))):
        raise FloatingPointError(f"non-finite state after step at t = {s.t + dt:.6g}")
    return WWState.from_spectra(grid, W, Q, s.t + dt)


def _schedule(t0: float, t_final: float, checkpoints, dt: float):
    """Step times hitting every checkpoint exactly with steps of at most dt."""
    marks = sorted({float(c) for c in checkpoints if t0 < c < t_final} | {float(t_final)})
    plan = []
    t = t0
    for m in marks:
        span = m - t
        nsteps = max(1, int(np.ceil(span / dt - 1e-9)))
        plan.append((m, nsteps, span / nsteps))
        t = m
    return plan


def ww_run(s0: WWState, t_final: float, p: PhysParams, checkpoints: Sequence[float] = (),
           dt: float = 0.05, monitor: bool = True, floor: float = DELTA_FLOOR,
           cfl: float = 0.8, on_checkpoint: Callable | None = None) -> RunResult:
    """Integrate to ``t_final``; states are returned at every checkpoint and at the end.

    Monitors record energy and momentum drift, positive-mode leakage, the
    Taylor sign minimum and the Jacobian minimum at each checkpoint.
    """
    from .energy import hamiltonian, momentum

    if t_final < s0.t:
        raise ValueError("t_final precedes the initial time")
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid = s0.grid
    props = {}
    lin = lambda u: K.linear_apply(grid, u[0], u[1], p.g, p.c, include_mean=False)
    rhs = lambda u: K.ww_rhs(grid, u[0], u[1], p.g, p.c)

    def step(u, h):
        key = round(h, 15)
        if key not in props:
            props[key] = (_pair_prop(K.Propagator(grid, p.g, p.c, h)),
                          _pair_prop(K.Propagator(grid, p.g, p.c, 0.5 * h)))
        E, E2 = props[key]
        return if_rk4(u, h, lin, E, E2, rhs)

    def record(s):
        if not monitor:
            return None
        d = diff_aux(to_diff_vars(s, floor=0.0), p)
        taylor = float(np.min(p.g + d.au.samples.real))
        jac = jacobian_min(s)
        if not jac > floor:
            raise InvariantViolation(f"interface degeneracy at t = {s.t:.6g}: min|1 + W_a| = {jac:.3e}")
        if not taylor > floor * p.g:
            raise InvariantViolation(f"Taylor sign failure at t = {s.t:.6g}: min(g + a) = {taylor:.3e}")
        leak = max(np.max(np.abs(s.W.spectrum[grid.index > 0]), initial=0.0),
                   np.max(np.abs(s.Q.spectrum[grid.index > 0]), initial=0.0))
        return {"t": s.t, "energy": hamiltonian(s, p), "momentum": momentum(s, p),
                "holomorphy": float(leak), "taylor_min": taylor, "jacobian_min": jac,
                "max_speed": float(np.max(np.abs(d.bu.samples)))}

    states = [s0]
    mons = [record(s0)] if monitor else []
    if monitor:
        v = mons[0]["max_speed"]
        if v > 0 and dt * v / grid.spacing > cfl:
            raise CFLViolation(f"dt = {dt} exceeds advection CFL bound {cfl * grid.spacing / v:.3e}")
    u = (s0.W.spectrum, s0.Q.spectrum)
    t = s0.t
    nsteps = 0
    for mark, n, h in _schedule(s0.t, t_final, checkpoints, dt) if t_final > s0.t else []:
        for _ in range(n):
            u = step(u, h)
            nsteps += 1
        if not (np.all(np.isfinite(u[0])) and np.all(np.isfinite(u[1]))):
            raise FloatingPointError(f"non-finite state before t = {mark:.6g}")
        t = mark
        s = WWState.from_spectra(grid, u[0], u[1], t)
        states.append(s)
        if monitor:
            mons.append(record(s))
        if on_checkpoint is not None:
            on_checkpoint(s)
    return RunResult(states=states, monitors=mons, steps=nsteps)


def drift_report(monitors: list) -> dict:
    """Relative drift of energy and momentum over a monitored run."""
    if not monitors:
        return {}
    e0, p0 = monitors[0]["energy"], monitors[0]["momentum"]
    e = np.array([m["energy"] for m in monitors])
    pm = np.array([m["momentum"] for m in monitors])
    return {
        "energy_drift": float(np.max(np.abs(e - e0)) / max(abs(e0), 1e-300)),
        "momentum_drift": float(np.max(np.abs(pm - p0)) / max(abs(p0), 1e-300)),
        "taylor_min": float(min(m["taylor_min"] for m in monitors)),
        "jacobian_min": float(min(m["jacobian_min"] for m in monitors)),
        "holomorphy": float(max(m["holomorphy"] for m in monitors)),
    }


# ---------------------------------------------------------------------------
# differentiated variables

def _S(grid, spec):
    return grid.to_samples(spec)


def _Ps(grid, x):
    return grid.to_samples(K.proj(grid, grid.to_spectrum(x)))


def to_diff_vars(s: WWState, floor: float = DELTA_FLOOR) -> DiffState:
    if floor > 0:
        check_nondegenerate(s, floor)
    grid = s.grid
    Wd = K.deriv(grid, s.W.spectrum)
    Qa = _S(grid, K.deriv(grid, s.Q.spectrum))
    R = K.holo(grid, grid.to_spectrum(Qa / (1.0 + _S(grid, Wd))))
    return DiffState(Wd=HoloField(grid, Wd), R=HoloField(grid, R), W=s.W)


def _diff_samples(d: DiffState, c: float):
    grid = d.grid
    Wd, R, W = d.Wd.samples, d.R.samples, d.W.samples
    Ra = _S(grid, K.deriv(grid, d.R.spectrum))
    cWd, cR = np.conj(Wd), np.conj(R)
    pb = _Ps(grid, R / (1.0 + cWd))
    b = 2.0 * pb.real
    pw = _Ps(grid, W / (1.0 + cWd))
    b1 = 2j * pw.imag
    bu = b - 0.5j * c * b1
    a = 2.0 * _Ps(grid, R * np.conj(Ra)).imag
    N = 2.0 * _Ps(grid, W * np.conj(Ra) - cWd * R).real
    a1 = 2.0 * R.real - N
    au = a + 0.5 * c * a1
    return dict(b=b, b1=b1, bu=bu.real, a=a, a1=a1, au=au, N=N, Ra=Ra)


def diff_aux(d: DiffState, p: PhysParams) -> DiffState:
    grid = d.grid
    f = _diff_samples(d, p.c)
    real = lambda x: RealField.from_real_samples(grid, x)
    return replace(d, b=real(f["b"]), b1=SpectralField.from_samples(grid, f["b1"]), bu=real(f["bu"]),
                   a=real(f["a"]), a1=real(f["a1"]), au=real(f["au"]), N=real(f["N"]))


def taylor_min(s: WWState, p: PhysParams) -> float:
    d = diff_aux(to_diff_vars(s, floor=0.0), p)
    return float(np.min(p.g + d.au.samples.real))


def diff_rhs_residual(s: WWState, p: PhysParams) -> tuple[SpectralField, SpectralField]:
    """Residuals of the differentiated system with time derivatives from ww_rhs.

    For the W_a equation the residual of
    ``Wd_t + b Wd_a + (1 + Wd) b_a - conj(R_a) - i(c/2)(conj(Wd) - Wd)`` is
    returned; for R the residual of
    ``R_t + b R_a + icR - i(g Wd - a)/(1 + Wd) - i(c/2)(R Wd + conj(R) Wd + N)/(1 + Wd)``.
    """
    grid = s.grid
    g, c = p.g, p.c
    d = to_diff_vars(s, floor=0.0)
    f = _diff_samples(d, c)
    dW, dQ = K.ww_rhs(grid, s.W.spectrum, s.Q.spectrum, g, c)
    Wd, R = d.Wd.samples, d.R.samples
    Wd_t = _S(grid, K.deriv(grid, dW))
    Qa_t = _S(grid, K.deriv(grid, dQ))
    R_t = (Qa_t - R * Wd_t) / (1.0 + Wd)
    Wd_a = _S(grid, K.deriv(grid, d.Wd.spectrum))
    bu = f["bu"]
    bu_a = _S(grid, K.deriv(grid, grid.to_spectrum(bu)))
    Ra = f["Ra"]
    res_w = Wd_t + bu * Wd_a + (1.0 + Wd) * bu_a - np.conj(Ra) - 0.5j * c * (np.conj(Wd) - Wd)
    res_r = (R_t + bu * Ra + 1j * c * R - 1j * (g * Wd - f["a"]) / (1.0 + Wd)
             - 0.5j * c * (R * Wd + np.conj(R) * Wd + f["N"]) / (1.0 + Wd))
    dm = grid.dealias_mask
    mk = lambda x: SpectralField(grid, np.where(dm, grid.to_spectrum(x), 0.0))
    return mk(res_w), mk(res_r)


def diff_underline_M(d: DiffState, p: PhysParams) -> SpectralField:
    """Coefficient M_ making the W_a line of the differentiated system exact."""
    grid = d.grid
    f = _diff_samples(d, p.c)
    Wd, cWd = d.Wd.samples, np.conj(d.Wd.samples)
    bu_a = _S(grid, K.deriv(grid, grid.to_spectrum(f["bu"])))
    M = f["Ra"] / (1.0 + cWd) + np.conj(f["Ra"]) / (1.0 + Wd) - bu_a + 0.5j * p.c * (cWd - Wd)
    return SpectralField.from_samples(grid, M)


# ---------------------------------------------------------------------------
# linearized equation

def _R_samples(grid, W, Q):
    Wa = _S(grid, K.deriv(grid, W))
    return _S(grid, K.deriv(grid, Q)) / (1.0 + Wa)


def good_to_q(grid: Grid, W, Q, w, r):
    """q from the good variable r = q - R w."""
    R = _R_samples(grid, W, Q)
    return r + K.holo(grid, grid.to_spectrum(R * _S(grid, w)))


def q_to_good(grid: Grid, W, Q, w, q):
    R = _R_samples(grid, W, Q)
    return q - K.holo(grid, grid.to_spectrum(R * _S(grid, w)))


def _lin_rhs_arrays(grid, W, Q, w, r, g, c):
    q = good_to_q(grid, W, Q, w, r)
    dW, dQ, dw, dq = K.ww_rhs_tangent(grid, W, Q, w, q, g, c)
    Wa = _S(grid, K.deriv(grid, W))
    R = _S(grid, K.deriv(grid, Q)) / (1.0 + Wa)
    R_t = (_S(grid, K.deriv(grid, dQ)) - R * _S(grid, K.deriv(grid, dW))) / (1.0 + Wa)
    dr = dq - K.holo(grid, grid.to_spectrum(R_t * _S(grid, w) + R * _S(grid, dw)))
    return dw, dr


def lin_rhs(l: LinState, s: WWState, p: PhysParams) -> tuple[HoloField, HoloField]:
    """Right side of the linearized equation in the good variables (w, r)."""
    check_nondegenerate(s, 0.0)
    grid = s.grid
    dw, dr = _lin_rhs_arrays(grid, s.W.spectrum, s.Q.spectrum, l.w.spectrum, l.r.spectrum, p.g, p.c)
    return HoloField(grid, dw), HoloField(grid, dr)


class BackgroundInterpolant:
    """Cubic Hermite interpolation in time of a stored trajectory.

    Nodal derivatives come from ww_rhs, so the interpolant is fourth order in
    the checkpoint spacing.
    """

    def __init__(self, states: Sequence[WWState], p: PhysParams):
        if len(states) < 2:
            raise ValueError("need at least two background states")
        self.grid = states[0].grid
        t = np.array([s.t for s in states])
        if np.any(np.diff(t) <= 0):
            raise ValueError("background times must increase")
        Y = np.array([np.concatenate([s.W.spectrum, s.Q.spectrum]) for s in states])
        dY = []
        for s in states:
            dW, dQ = K.ww_rhs(self.grid, s.W.spectrum, s.Q.spectrum, p.g, p.c)
            dY.append(np.concatenate([dW, dQ]))
        self.t0, self.t1 = t[0], t[-1]
        self._spl = CubicHermiteSpline(t, Y, np.array(dY), axis=0)

    def __call__(self, t: float):
        if t < self.t0 - 1e-12 or t > self.t1 + 1e-12:
            raise ValueError(f"time {t} outside the stored background [{self.t0}, {self.t1}]")
        y = self._spl(t)
        n = self.grid.n
        return y[:n], y[n:]

    def state(self, t: float) -> WWState:
        W, Q = self(t)
        return WWState.from_spectra(self.grid, K.holo(self.grid, W), K.holo(self.grid, Q), t)


def lin_run(l0: LinState, trajectory: Sequence[WWState] | BackgroundInterpolant, p: PhysParams,
            t_final: float | None = None, dt: float = 0.05, checkpoints: Sequence[float] = (),
            monitor: bool = True) -> RunResult:
    """Integrate the linearized equation along a stored background."""
    from .energy import e_lin3

    bg = trajectory if isinstance(trajectory, BackgroundInterpolant) else BackgroundInterpolant(trajectory, p)
    grid = bg.grid
    t_final = bg.t1 if t_final is None else t_final
    E_full = {}

    def props(h):
        key = round(h, 15)
        if key not in E_full:
            E_full[key] = (_pair_prop(K.Propagator(grid, p.g, p.c, h, include_mean=True)),
                           _pair_prop(K.Propagator(grid, p.g, p.c, 0.5 * h, include_mean=True)))
        return E_full[key]

    lin = lambda u: K.linear_apply(grid, u[0], u[1], p.g, p.c, include_mean=True)

    def record(l):
        if not monitor:
            return None
        s = bg.state(l.t)
        return {"t": l.t, "e_lin3": e_lin3(l, s, None, p),
                "energy_norm": float(np.sqrt(_e0_good(l, p)))}

    states = [l0]
    mons = [record(l0)] if monitor else []
    u = (l0.w.spectrum, l0.r.spectrum)
    tcur = l0.t
    nsteps = 0
    for mark, n, h in _schedule(l0.t, t_final, checkpoints, dt) if t_final > l0.t else []:
        E, E2 = props(h)
        for _ in range(n):
            # the stage times of IF-RK4 are t, t+h/2, t+h/2, t+h
            stage = iter((tcur, tcur + 0.5 * h, tcur + 0.5 * h, tcur + h))

            def rhs(v):
                ts = next(stage)
                W, Q = bg(ts)
                return _lin_rhs_arrays(grid, W, Q, v[0], v[1], p.g, p.c)

            u = if_rk4(u, h, lin, E, E2, rhs)
            tcur += h
            nsteps += 1
        tcur = mark
        l = LinState(HoloField(grid, u[0]), HoloField(grid, u[1]), mark)
        states.append(l)
        if monitor:
            mons.append(record(l))
    return RunResult(states=states, monitors=mons, steps=nsteps)


def _e0_good(l: LinState, p: PhysParams) -> float:
    from .energy import linear_energy
    return linear_energy(l.w, l.r, p)
