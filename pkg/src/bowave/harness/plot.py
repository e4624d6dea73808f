"""gnuplot script for log err vs log eps, with the fitted power law."""
from __future__ import annotations

import csv
from pathlib import Path

from .fit import fit_power_law

QUANTITIES = ("err_main", "err_h0", "err_h1", "err_h2")


def terminal_points(csv_path: Path, column: str) -> list[tuple[float, float]]:
    """(eps, value) at the latest recorded time of each eps with status ok."""
    best = {}
    with Path(csv_path).open(newline="") as fh:
        for r in csv.DictReader(fh):
            if r.get("status") != "ok" or r.get(column) in ("", None):
                continue
            eps, t = float(r["eps"]), float(r["t_bo"])
            if eps not in best or t > best[eps][0]:
                best[eps] = (t, float(r[column]))
    return sorted((e, v) for e, (t, v) in best.items())


def find_records(directory: Path) -> Path:
    d = Path(directory)
    if d.is_file():
        return d
    for name in ("converge.csv", "perturb.csv"):
        if (d / name).exists():
            return d / name
    hits = sorted(d.glob("*.csv"))
    if not hits:
        raise FileNotFoundError(f"no record CSV in {d}")
    return hits[0]


def gnuplot_script(csv_path: Path, columns=("err_main",), output: str = "convergence.png") -> str:
    lines = ["# log-log convergence plot; run with: gnuplot <this file>",
             "set terminal pngcairo size 900,700 noenhanced",
             f"set output '{output}'",
             "set logscale xy",
             "set xlabel 'eps'",
             "set ylabel 'error'",
             "set key top left",
             "set grid"]
    plots = []
    for i, col in enumerate(columns):
        pts = terminal_points(csv_path, col)
        if not pts:
            continue
        lines.append(f"$D{i} << EOD")
        lines += [f"{e!r} {v!r}" for e, v in pts]
        lines.append("EOD")
        title = col
        if len(pts) >= 3:
            f = fit_power_law(pts)
            lines.append(f"f{i}(x) = exp({f.intercept!r}) * x**({f.exponent!r})")
            title = f"{col}: slope {f.exponent:.3f}"
            plots.append(f"f{i}(x) with lines dt 2 lc {i + 1} notitle")
        plots.append(f"$D{i} using 1:2 with linespoints pt 7 lc {i + 1} title '{title}'")
    if not plots:
        raise ValueError(f"{csv_path}: no completed records for {list(columns)}")
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"
