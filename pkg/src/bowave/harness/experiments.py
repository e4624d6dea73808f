"""Epsilon sweeps comparing exact water waves with the Benjamin-Ono approximation.

Per eps: solve BO once (shared), truncate at b/eps, build Y~ and the
approximate state (W^eps, Q^eps), run the exact flow from that state to
T/eps^2 and measure the errors at every checkpoint.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .. import bo, bridge
from ..spectral import SpectralField, hdot_energy_norm, make_grid, norm
from ..wavetank import InvariantViolation, WWState, drift_report, to_diff_vars, ww_run
from .config import RunConfig
from .fit import fit_power_law
from .store import RecordStore

log = logging.getLogger(__name__)


@dataclass
class ConvergenceRecord:
    eps: float
    times: list = field(default_factory=list)
    err_main: list = field(default_factory=list)
    err_hn: list = field(default_factory=list)  # err_hn[i][n] at times[i]
    residual: dict = field(default_factory=dict)
    drifts: dict = field(default_factory=dict)
    status: str = "ok"
    message: str = ""
    delta: float | None = None

    def __post_init__(self):
        vals = list(self.err_main) + [v for row in self.err_hn for v in row] + list(self.residual.values())
        vals += [v for k, v in self.drifts.items() if k.endswith("drift")]
        bad = [v for v in vals if not (math.isfinite(v) and v >= 0)]
        if bad:
            raise ValueError(f"record at eps = {self.eps} holds non-finite or negative entries {bad[:3]}")

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def terminal(self) -> float:
        return self.err_main[-1]

    def terminal_hn(self, n: int) -> float:
        return self.err_hn[-1][n]


# ---------------------------------------------------------------------------
# building blocks

def bo_grid(cfg: RunConfig):
    return make_grid(cfg.grid.bo_points, cfg.grid.bo_length)


def initial_bo(cfg: RunConfig, seed: int | None = None) -> bo.BOState:
    return bo.default_initial_data(bo_grid(cfg), m=cfg.m, seed=cfg.seed if seed is None else seed,
                                   bumps=cfg.data.bumps, widths=tuple(cfg.data.widths))


def solve_bo(cfg: RunConfig, s0: bo.BOState | None = None) -> bo.BORun:
    """BO solution at the recorded times (the BO flow does not involve eps)."""
    s0 = initial_bo(cfg) if s0 is None else s0
    p = cfg.phys(cfg.epsilons[0])
    return bo.bo_run(s0, cfg.T, p, checkpoints=cfg.checkpoints, dt=cfg.grid.bo_dt, m=cfg.m)


def tilde_Y_at(state: bo.BOState, cfg: RunConfig, eps: float):
    p = cfg.phys(eps)
    wg = bo.ww_grid_for(state.grid, p, cfg.grid.ww_min_points)
    return bo.build_tilde_Y(bo.truncate(state, p), p, wg)


def main_errors(s: WWState, y: bo.YEpsField, cfg: RunConfig, eps: float):
    """||(W - 2Y~, Q - (2g/c)Y~)||_H and ||(Wd, R)||_{Hdot^n}, n < m."""
    p = cfg.phys(eps)
    grid = s.grid
    dw = SpectralField(grid, s.W.spectrum - 2 * y.Y.spectrum)
    dq = SpectralField(grid, s.Q.spectrum - (2 * p.g / p.c) * y.Y.spectrum)
    err = norm((dw, dq), "energy")
    d = to_diff_vars(s, floor=0.0)
    hn = [hdot_energy_norm(d.Wd, d.R, n) for n in range(cfg.m)]
    return err, hn


def perturbation_state(cfg: RunConfig, eps: float, delta: float) -> WWState:
    """Well-prepared, band-limited perturbation of H-size eps^(1 + delta).

    Built as the approximate state of a second seeded BO profile, rescaled;
    rescaling keeps the frequency concentration and the branch coupling.
    """
    p = cfg.phys(eps)
    v0 = initial_bo(cfg, seed=cfg.perturbation.seed)
    a = bridge.build_approx_ww(tilde_Y_at(v0, cfg, eps), p, residuals=False)
    s = a.state
    size = norm((s.W, s.Q), "energy")
    return s.scaled(eps ** (1 + delta) / size)


def check_delta(delta: float, m: int):
    lo = 1.0 / (2 * m - 2)
    if not lo < delta <= 0.5:
        raise ValueError(f"delta must lie in ({lo:.4g}, 1/2], got {delta}")


def _one_eps(cfg: RunConfig, eps: float, bo_states: list, delta: float | None) -> ConvergenceRecord:
    p = cfg.phys(eps)
    ys = [tilde_Y_at(s, cfg, eps) for s in bo_states]
    a0 = bridge.build_approx_ww(ys[0], p)
    s0 = a0.state
    if delta is not None:
        ds = perturbation_state(cfg, eps, delta)
        s0 = WWState.from_spectra(s0.grid, s0.W.spectrum + ds.W.spectrum, s0.Q.spectrum + ds.Q.spectrum, s0.t)
    t_ww = [t / eps ** 2 for t in cfg.times]
    run = ww_run(s0, t_ww[-1], p, checkpoints=t_ww[1:-1], dt=cfg.grid.ww_dt)
    if len(run.states) != len(ys):
        raise RuntimeError("checkpoint bookkeeping mismatch")
    errs, hns = [], []
    for s, y in zip(run.states, ys):
        e, h = main_errors(s, y, cfg, eps)
        errs.append(e)
        hns.append(h)
    res = {k: float(v) for k, v in a0.norms.items()}
    dr = drift_report(run.monitors)
    dr["steps"] = run.steps
    return ConvergenceRecord(eps=eps, times=list(cfg.times), err_main=errs, err_hn=hns,
                             residual=res, drifts=dr, delta=delta)


# ---------------------------------------------------------------------------
# persistence of records

def record_columns(m: int) -> list[str]:
    return (["eps", "delta", "t_bo", "t_ww", "err_main"] + [f"err_h{n}" for n in range(m)]
            + ["res_g_H1", "res_k_Hhalf", "res_total", "energy_drift", "momentum_drift",
               "taylor_min", "jacobian_min", "steps", "status", "message"])


def record_rows(r: ConvergenceRecord, m: int) -> list[dict]:
    base = {"eps": r.eps, "delta": "" if r.delta is None else r.delta,
            "status": r.status, "message": r.message}
    res = {"res_g_H1": r.residual.get("g_H1", ""), "res_k_Hhalf": r.residual.get("k_Hhalf", ""),
           "res_total": r.residual.get("total", "")}
    dr = {k: r.drifts.get(k, "") for k in ("energy_drift", "momentum_drift", "taylor_min",
                                          "jacobian_min", "steps")}
    if not r.ok:
        blank = {"t_bo": "", "t_ww": "", "err_main": "", **{f"err_h{n}": "" for n in range(m)}}
        return [{**base, **blank, **res, **dr}]
    rows = []
    for t, e, h in zip(r.times, r.err_main, r.err_hn):
        rows.append({**base, "t_bo": t, "t_ww": t / r.eps ** 2, "err_main": e,
                     **{f"err_h{n}": h[n] for n in range(m)}, **res, **dr})
    return rows


def records_from_rows(rows: list[dict], m: int) -> list[ConvergenceRecord]:
    out = {}
    f = lambda v: float(v) if v not in ("", None) else None
    for r in rows:
        key = r["eps"]
        if key not in out:
            res = {k: f(r[c]) for k, c in (("g_H1", "res_g_H1"), ("k_Hhalf", "res_k_Hhalf"),
                                            ("total", "res_total")) if f(r[c]) is not None}
            dr = {k: f(r[k]) for k in ("energy_drift", "momentum_drift", "taylor_min", "jacobian_min",
                                       "steps") if f(r[k]) is not None}
            out[key] = ConvergenceRecord(eps=float(r["eps"]), residual=res, drifts=dr, status=r["status"],
                                         message=r["message"], delta=f(r["delta"]))
        rec = out[key]
        if rec.ok:
            rec.times.append(float(r["t_bo"]))
            rec.err_main.append(float(r["err_main"]))
            rec.err_hn.append([float(r[f"err_h{n}"]) for n in range(m)])
    for rec in out.values():
        order = np.argsort(rec.times)
        rec.times = [rec.times[i] for i in order]
        rec.err_main = [rec.err_main[i] for i in order]
        rec.err_hn = [rec.err_hn[i] for i in order]
    return list(out.values())


def eps_key(eps: float) -> str:
    return repr(float(eps))


# ---------------------------------------------------------------------------
# sweeps

def _sweep(cfg: RunConfig, store: RecordStore | None, delta: float | None, resume: bool,
           bo_run_result: bo.BORun | None) -> list[ConvergenceRecord]:
    done = {}
    if store is not None and resume:
        for rec in records_from_rows(store.rows(), cfg.m):
            if rec.ok:
                done[eps_key(rec.eps)] = rec
    bo_states = None
    records = []
    for eps in cfg.epsilons:
        key = eps_key(eps)
        if key in done:
            log.info("eps = %s already recorded, skipping", key)
            records.append(done[key])
            continue
        if bo_states is None:
            bo_states = (bo_run_result or solve_bo(cfg)).states
        if store is not None:
            store.drop("eps", key)
        try:
            rec = _one_eps(cfg, eps, bo_states, delta)
        except InvariantViolation as exc:
            rec = ConvergenceRecord(eps=eps, status="degenerate", message=str(exc), delta=delta)
        except (ValueError, FloatingPointError, RuntimeError) as exc:
            rec = ConvergenceRecord(eps=eps, status="failed", message=f"{type(exc).__name__}: {exc}",
                                    delta=delta)
        log.info("eps = %s: %s", key, rec.status if not rec.ok else f"err_main = {rec.terminal:.4e}")
        if store is not None:
            store.append(record_rows(rec, cfg.m))
        records.append(rec)
    return records


def run_main_experiment(cfg: RunConfig, store: RecordStore | None = None, resume: bool = True,
                        bo_run_result: bo.BORun | None = None) -> list[ConvergenceRecord]:
    return _sweep(cfg, store, None, resume, bo_run_result)


def run_perturbation_experiment(cfg: RunConfig, delta: float, store: RecordStore | None = None,
                                resume: bool = True, bo_run_result: bo.BORun | None = None):
    check_delta(delta, cfg.m)
    return _sweep(cfg, store, delta, resume, bo_run_result)


# ---------------------------------------------------------------------------
# summaries

def _law(points):
    pts = [(e, v) for e, v in points if v > 0]
    if len(pts) < 3:
        return None
    f = fit_power_law(pts)
    return {"exponent": f.exponent, "intercept": f.intercept, "r2": f.r2, "stderr": f.stderr,
            "npoints": f.npoints}


def summarize(records: list[ConvergenceRecord], m: int) -> dict:
    ok = [r for r in records if r.ok]
    out = {"n_ok": len(ok), "n_total": len(records),
           "flagged": {eps_key(r.eps): r.status for r in records if not r.ok},
           "main": _law([(r.eps, r.terminal) for r in ok])}
    for n in range(m):
        out[f"h{n}"] = _law([(r.eps, r.terminal_hn(n)) for r in ok])
    out["residual"] = _law([(r.eps, r.residual["total"]) for r in ok if "total" in r.residual])
    out["max_energy_drift"] = max((r.drifts.get("energy_drift", 0.0) for r in ok), default=None)
    out["max_momentum_drift"] = max((r.drifts.get("momentum_drift", 0.0) for r in ok), default=None)
    return out


MAIN_SLOPE, MAIN_R2, HN_MARGIN, RES_SLOPE = 1.3, 0.98, 1.3, 3.2


def main_checks(summary: dict, m: int, slope_min: float = MAIN_SLOPE) -> list[tuple[str, bool, str]]:
    checks = []
    law = summary["main"]
    ok = law is not None and law["exponent"] >= slope_min and law["r2"] >= MAIN_R2
    checks.append(("main slope", ok, "no fit" if law is None else
                   f"slope {law['exponent']:.3f} (>= {slope_min}), R2 {law['r2']:.4f} (>= {MAIN_R2})"))
    for n in range(m):
        law = summary[f"h{n}"]
        need = n + HN_MARGIN
        ok = law is not None and law["exponent"] >= need
        checks.append((f"h{n} slope", ok, "no fit" if law is None else
                       f"slope {law['exponent']:.3f} (>= {need})"))
    checks.append(("all eps ok", summary["n_ok"] == summary["n_total"], f"{summary['flagged'] or 'none flagged'}"))
    return checks


def residual_study(cfg: RunConfig, factor: int = 2) -> list[dict]:
    """Residual norms at t = 0 on the default grid and one ``factor`` times finer."""
    s0 = initial_bo(cfg)
    rows = []
    for eps in cfg.epsilons:
        p = cfg.phys(eps)
        y = tilde_Y_at(s0, cfg, eps)
        a = bridge.build_approx_ww(y, p)
        fine = bridge.build_approx_ww(bridge.refine(y, factor), p)
        tot, tot2 = a.norms["total"], fine.norms["total"]
        rows.append({"eps": eps, "n_ww": y.grid.n, "g_H1": a.norms["g_H1"], "k_Hhalf": a.norms["k_Hhalf"],
                     "total": tot, "total_fine": tot2, "grid_change": abs(tot2 - tot) / tot})
    return rows


def spectral_summary(s: WWState, eps: float | None = None, levels=(0.5, 0.9, 0.99, 0.999999)) -> dict:
    """Where the energy of (W, Q) sits in |k| (also in units of eps when given)."""
    grid = s.grid
    k = np.abs(grid.k)
    dens = (np.abs(s.W.spectrum) ** 2 + np.abs(k) * np.abs(s.Q.spectrum) ** 2) * grid.length
    total = dens.sum()
    out = {"n": grid.n, "length": grid.length, "kmax_grid": grid.kmax,
           "positive_leak": float(max(np.abs(s.W.spectrum[grid.index > 0]).max(initial=0.0),
                                      np.abs(s.Q.spectrum[grid.index > 0]).max(initial=0.0)))}
    if total == 0:
        out["quantiles"] = {str(q): 0.0 for q in levels}
        return out
    order = np.argsort(k)
    cum = np.cumsum(dens[order]) / total
    out["quantiles"] = {str(q): float(k[order][min(np.searchsorted(cum, q), len(k) - 1)]) for q in levels}
    if eps:
        out["quantiles_over_eps"] = {q: v / eps for q, v in out["quantiles"].items()}
    a = np.abs(s.W.spectrum)
    nz = k[a > 1e-12 * a.max()] if a.max() > 0 else k[:0]
    out["support_W"] = [float(nz.min()), float(nz.max())] if nz.size else [0.0, 0.0]
    return out
