"""Command line entry point: ``bowave <command> --config run.yaml [--assert]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .. import bo, bridge
from ..energy import energy_report
from ..spectral import norm
from ..wavetank import InvariantViolation, drift_report, ww_run
from . import experiments as ex
from .config import ConfigError, load_config
from .dumps import DumpError, load_state, save_state
from .plot import QUANTITIES, find_records, gnuplot_script
from .store import RecordStore, output_dir

log = logging.getLogger("bowave")

EXIT_OK, EXIT_ASSERT, EXIT_USAGE = 0, 1, 2


def _report(checks) -> bool:
    for name, ok, detail in checks:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return all(ok for _, ok, _ in checks)


def _dump_name(prefix: str, eps: float | None = None, t: float | None = None) -> str:
    parts = [prefix]
    if eps is not None:
        parts.append(f"eps{eps:g}")
    if t is not None:
        parts.append(f"t{t:g}")
    return "_".join(parts) + ".bin"


# ---------------------------------------------------------------------------
# commands

def cmd_bo_run(cfg, args):
    out = output_dir(cfg)
    r = ex.solve_bo(cfg)
    store = RecordStore(out, "bo-run", cfg, ["t", "mean", "L2", "Hm", "max_abs"])
    store.drop("config_hash", store.hash)
    files = []
    for s in r.states:
        store.append([{"t": s.t, "mean": s.U.mean.real, "L2": norm(s.U, "L2"), "Hm": norm(s.U, "H", cfg.m),
                       "max_abs": float(np.max(np.abs(s.U.samples)))}])
        files.append(save_state(out / "dumps" / _dump_name("bo", t=s.t), s, cfg.phys(cfg.epsilons[0])).name)
    summary = {**r.report, "steps": r.steps}
    store.write_manifest(summary, files)
    print(json.dumps(summary, indent=2))
    return [("BO L2 drift", r.report["L2_drift"] < 1e-8, f"{r.report['L2_drift']:.3e} (< 1e-8)")]


def cmd_ww_run(cfg, args):
    out = output_dir(cfg)
    cols = ["eps", "t_ww", "energy", "momentum", "taylor_min", "jacobian_min", "holomorphy", "status", "message"]
    store = RecordStore(out, "ww-run", cfg, cols)
    done = store.completed() if not args.fresh else set()
    s0 = ex.initial_bo(cfg)
    checks, files = [], []
    for eps in cfg.epsilons:
        key = ex.eps_key(eps)
        if key in done:
            print(f"eps = {key}: recorded, skipped")
            continue
        store.drop("eps", key)
        p = cfg.phys(eps)
        a = bridge.build_approx_ww(ex.tilde_Y_at(s0, cfg, eps), p, residuals=False)
        t_ww = [t / eps ** 2 for t in cfg.times]
        try:
            run = ww_run(a.state, t_ww[-1], p, checkpoints=t_ww[1:-1], dt=cfg.grid.ww_dt)
        except (InvariantViolation, FloatingPointError, ValueError) as exc:
            store.append([{**{c: "" for c in cols}, "eps": eps, "status": "failed", "message": str(exc)}])
            checks.append((f"ww run eps={eps:g}", False, str(exc)))
            continue
        store.append([{"eps": eps, "t_ww": m["t"], "energy": m["energy"], "momentum": m["momentum"],
                       "taylor_min": m["taylor_min"], "jacobian_min": m["jacobian_min"],
                       "holomorphy": m["holomorphy"], "status": "ok", "message": ""} for m in run.monitors])
        files.append(save_state(out / "dumps" / _dump_name("ww", eps, cfg.T), run.states[-1], p).name)
        dr = drift_report(run.monitors)
        print(f"eps = {eps:g}: steps {run.steps}, " + ", ".join(f"{k} {v:.3e}" for k, v in dr.items()))
        checks.append((f"ww drift eps={eps:g}", dr["energy_drift"] < 1e-7 and dr["momentum_drift"] < 1e-7,
                       f"energy {dr['energy_drift']:.2e}, momentum {dr['momentum_drift']:.2e} (< 1e-7)"))
    store.write_manifest({"checks": checks}, files)
    return checks


def cmd_approx_build(cfg, args):
    out = output_dir(cfg)
    cols = ["eps", "n_ww", "size", "coupling", "conc_max", "well_prepared", "g_H1", "k_Hhalf",
            "k99_over_eps", "support_lo", "support_hi"]
    store = RecordStore(out, "approx-build", cfg, cols)
    store.drop("config_hash", store.hash)
    s0 = ex.initial_bo(cfg)
    checks, files = [], []
    for eps in cfg.epsilons:
        p = cfg.phys(eps)
        y = ex.tilde_Y_at(s0, cfg, eps)
        a = bridge.build_approx_ww(y, p)
        wp = bridge.well_preparedness(a.state, p, m=cfg.m)
        sp = ex.spectral_summary(a.state, eps)
        lo, hi = bo.frequency_support(y, 1e-12)
        rat = wp["ratios"]
        store.append([{"eps": eps, "n_ww": y.grid.n, "size": rat["size"], "coupling": rat["coupling"],
                       "conc_max": max(v for k, v in rat.items() if k.startswith("conc")),
                       "well_prepared": wp["well_prepared"], "g_H1": a.norms["g_H1"],
                       "k_Hhalf": a.norms["k_Hhalf"], "k99_over_eps": sp["quantiles_over_eps"]["0.99"],
                       "support_lo": lo, "support_hi": hi}])
        files.append(save_state(out / "dumps" / _dump_name("approx", eps, 0.0), a.state, p,
                                extra={"ratios": rat}).name)
        checks.append((f"well-prepared eps={eps:g}", wp["well_prepared"],
                       ", ".join(f"{k} {v:.3g}" for k, v in rat.items())))
    store.write_manifest({"checks": checks}, files)
    return checks


def cmd_residuals(cfg, args):
    out = output_dir(cfg)
    rows = ex.residual_study(cfg)
    store = RecordStore(out, "residuals", cfg, list(rows[0]))
    store.drop("config_hash", store.hash)
    store.append(rows)
    law = ex._law([(r["eps"], r["total"]) for r in rows])
    worst = max(r["grid_change"] for r in rows)
    store.write_manifest({"fit": law, "max_grid_change": worst})
    for r in rows:
        print(f"eps = {r['eps']:g}: ||g||_H1 + ||k||_Hhalf = {r['total']:.4e} (fine grid change {r['grid_change']:.1e})")
    return [("residual slope", law is not None and law["exponent"] >= ex.RES_SLOPE,
             "no fit" if law is None else f"slope {law['exponent']:.3f} (>= {ex.RES_SLOPE})"),
            ("residual grid convergence", worst < 0.01, f"max relative change {worst:.2e} (< 1e-2)")]


def _sweep_output(cfg, recs, store):
    summary = ex.summarize(recs, cfg.m)
    store.write_manifest(summary)
    for r in recs:
        if r.ok:
            print(f"eps = {r.eps:g}: err_main {r.terminal:.4e}, "
                  + ", ".join(f"h{n} {r.terminal_hn(n):.3e}" for n in range(cfg.m)))
        else:
            print(f"eps = {r.eps:g}: {r.status}: {r.message}")
    return summary


def cmd_converge(cfg, args):
    out = output_dir(cfg)
    store = RecordStore(out, "converge", cfg, ex.record_columns(cfg.m))
    recs = ex.run_main_experiment(cfg, store, resume=not args.fresh)
    summary = _sweep_output(cfg, recs, store)
    return ex.main_checks(summary, cfg.m)


def cmd_perturb(cfg, args):
    out = output_dir(cfg)
    deltas = args.delta if args.delta else cfg.perturbation.deltas
    checks = []
    bo_run = ex.solve_bo(cfg)
    for d in deltas:
        ex.check_delta(d, cfg.m)
        store = RecordStore(out, f"perturb-delta{d:g}", cfg, ex.record_columns(cfg.m))
        recs = ex.run_perturbation_experiment(cfg, d, store, resume=not args.fresh, bo_run_result=bo_run)
        summary = _sweep_output(cfg, recs, store)
        law = summary["main"]
        need = 1 + d - 0.2
        ok = law is not None and law["exponent"] >= need
        detail = "no fit" if law is None else f"slope {law['exponent']:.3f} (>= {need:.2f})"
        if d == 0.5:
            ok = ok and law["r2"] >= ex.MAIN_R2
            detail += f", R2 {law['r2']:.4f} (>= {ex.MAIN_R2})"
        checks.append((f"perturbation delta={d:g}", ok, detail))
    return checks


def cmd_diagnose(cfg, args):
    state, p, meta = load_state(args.state)
    if args.eps is not None:
        p = p.with_eps(args.eps) if p is not None else None
    print(f"dump {args.state}: kind {meta['kind']}, n {meta['n']}, length {meta['length']:.6g}, t {meta['t']:.6g}")
    if meta["kind"] == "bo":
        U = state.U
        print(json.dumps({"L2": norm(U, "L2"), "H3": norm(U, "H", 3), "max_abs": float(np.abs(U.samples).max())},
                         indent=2))
        return []
    if p is None:
        raise DumpError("dump has no parameters; pass --eps")
    rep = energy_report(state, p)
    print("EnergyReport")
    for k, v in asdict(rep).items():
        print(f"  {k:>13}: {v}" if isinstance(v, str) else f"  {k:>13}: {v:.6e}")
    wp = bridge.well_preparedness(state, p, m=args.m)
    print(f"well-preparedness (eps = {p.eps:g}, threshold {wp['threshold']:g}): "
          f"{'well-prepared' if wp['well_prepared'] else 'NOT well-prepared'}")
    for k, v in wp["ratios"].items():
        print(f"  {k:>9}: {v:.4g}{'' if wp['passed'][k] else '  <- exceeds threshold'}")
    sp = ex.spectral_summary(state, p.eps)
    print("frequency support")
    print(f"  grid n {sp['n']}, kmax {sp['kmax_grid']:.4g}, positive-mode leak {sp['positive_leak']:.2e}")
    if "support_W" in sp:
        print(f"  W nonzero band |k| in [{sp['support_W'][0]:.4g}, {sp['support_W'][1]:.4g}]")
    for q, v in sp["quantiles"].items():
        extra = f" = {sp['quantiles_over_eps'][q]:.4g} eps" if "quantiles_over_eps" in sp else ""
        print(f"  {float(q) * 100:g}% of energy below |k| = {v:.4g}{extra}")
    return [("well-prepared", wp["well_prepared"], ", ".join(f"{k} {v:.3g}" for k, v in wp["ratios"].items()))]


def cmd_plot_script(cfg, args):
    src = find_records(Path(args.source))
    text = gnuplot_script(src, tuple(args.column), output=args.png)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return []


COMMANDS = {
    "bo-run": (cmd_bo_run, "solve BO at the recorded times; dumps and conservation records"),
    "ww-run": (cmd_ww_run, "run the exact water-wave flow from the approximate data per eps"),
    "approx-build": (cmd_approx_build, "build (W^eps, Q^eps) per eps; ratios and dumps"),
    "residuals": (cmd_residuals, "residual norms of the approximate solution per eps"),
    "converge": (cmd_converge, "main eps sweep with power-law fits"),
    "perturb": (cmd_perturb, "perturbed eps sweeps for each delta"),
    "diagnose": (cmd_diagnose, "inspect a state dump"),
    "plot-script": (cmd_plot_script, "emit a gnuplot script from recorded runs"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bowave", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        s = sub.add_parser(name, help=help_)
        needs_cfg = name not in ("diagnose", "plot-script")
        s.add_argument("--config", required=needs_cfg, help="YAML or JSON run config")
        s.add_argument("--assert", dest="check", action="store_true",
                       help="exit nonzero when an acceptance check fails")
        if name in ("ww-run", "converge", "perturb"):
            s.add_argument("--fresh", action="store_true", help="recompute eps values already recorded")
        if name == "perturb":
            s.add_argument("--delta", type=float, action="append", help="override the config's deltas")
        if name == "diagnose":
            s.add_argument("--state", required=True, help="dump .bin (sidecar .json next to it)")
            s.add_argument("--eps", type=float, default=None)
            s.add_argument("--m", type=int, default=3)
        if name == "plot-script":
            s.add_argument("--from", dest="source", required=True, help="run directory or CSV")
            s.add_argument("--column", action="append", choices=QUANTITIES, default=None)
            s.add_argument("--png", default="convergence.png")
            s.add_argument("--out", default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "column", None) is None and args.command == "plot-script":
        args.column = ["err_main"]
    try:
        cfg = load_config(args.config) if args.config else None
        checks = COMMANDS[args.command][0](cfg, args)
    except (ConfigError, DumpError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    passed = _report(checks) if checks else True
    return EXIT_ASSERT if args.check and not passed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
