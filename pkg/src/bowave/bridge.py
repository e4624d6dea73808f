"""From the Benjamin-Ono field Y~ to approximate water waves.

Contents: cubic truncations of the nonlinear coefficients, the quadratic
sources, the branch diagonalization Y+/Y-, the approximate solution
(W^eps, Q^eps) with its residuals, and well-preparedness ratios.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .bo import YEpsField
from .params import PhysParams
from .spectral import Grid, HoloField, SpectralField, hdot_sq, norm, pad_spectrum, make_grid
from .wavetank import WWState, to_diff_vars


def _s(grid, spec):
    return grid.to_samples(spec)


def _P(grid, samples):
    return K.proj(grid, grid.to_spectrum(samples))


def _band(grid, samples):
    return K.holo(grid, grid.to_spectrum(samples))


# ---------------------------------------------------------------------------
# expansions

def cubic_truncations(s: WWState):
    """Terms up to cubic order of F, F1 and T1 (spectra).

    T1 is expanded from its definition P[W conj(Q_a)/(1 + conj W_a) - conj(W) Q_a/(1 + W_a)].
    """
    grid = s.grid
    W, Q = s.W.spectrum, s.Q.spectrum
    w, wa = _s(grid, W), _s(grid, K.deriv(grid, W))
    qa = _s(grid, K.deriv(grid, Q))
    cw, cwa, cqa = np.conj(w), np.conj(wa), np.conj(qa)
    F = (_band(grid, qa - qa * wa + qa * wa ** 2)
         - _P(grid, qa * cwa - cqa * wa)
         + _P(grid, qa * (wa * cwa + cwa ** 2))
         - _P(grid, cqa * (wa ** 2 + wa * cwa)))
    F1 = (_P(grid, w + cw) - K.deriv(grid, _P(grid, w * cw))
          + _P(grid, w * cwa ** 2 + cw * wa ** 2))
    T1 = _P(grid, w * cqa - cw * qa) + _P(grid, cw * wa * qa - w * cwa * cqa)
    return F, F1, T1


def quadratic_sources(s: WWState, p: PhysParams):
    """G2, K2: the quadratic parts of W_t + Q_a and Q_t + icQ - igW."""
    grid = s.grid
    c = p.c
    W, Q = s.W.spectrum, s.Q.spectrum
    w, wa = _s(grid, W), _s(grid, K.deriv(grid, W))
    qa = _s(grid, K.deriv(grid, Q))
    cw, cwa, cqa = np.conj(w), np.conj(wa), np.conj(qa)
    G = (-0.5j * c * K.deriv(grid, _P(grid, w * cw)) + 0.5j * c * _band(grid, w * wa)
         + _P(grid, qa * cwa - cqa * wa))
    Kq = (-_band(grid, qa * qa) - _P(grid, qa * cqa) + 0.5j * c * _band(grid, w * qa)
          + 0.5j * c * _P(grid, w * cqa - cw * qa))
    return G, Kq


# ---------------------------------------------------------------------------
# branch diagonalization

@dataclass(frozen=True, eq=False)
class BranchPair:
    Yplus: HoloField
    Yminus: HoloField


def _root(grid: Grid, p: PhysParams) -> np.ndarray:
    return np.sqrt(p.c ** 2 + 4.0 * p.g * np.abs(grid.k))


def diagonalize(s: WWState, p: PhysParams) -> BranchPair:
    """Y+- = (W - ((c -+ S)/2g) Q)/2 with S = sqrt(c^2 + 4g|D|)."""
    grid = s.grid
    S = _root(grid, p)
    W, Q = s.W.spectrum, s.Q.spectrum
    yp = 0.5 * (W - (p.c - S) / (2 * p.g) * Q)
    ym = 0.5 * (W - (p.c + S) / (2 * p.g) * Q)
    return BranchPair(HoloField(grid, yp), HoloField(grid, ym))


def undiagonalize(bp: BranchPair, p: PhysParams, t: float = 0.0) -> WWState:
    grid = bp.Yplus.grid
    S = _root(grid, p)
    yp, ym = bp.Yplus.spectrum, bp.Yminus.spectrum
    Q = 2 * p.g / S * (yp - ym)
    W = yp + ym + p.c / (2 * p.g) * Q
    return WWState.from_spectra(grid, W, Q, t)


def diagonalize_expanded(s: WWState, p: PhysParams) -> BranchPair:
    """Same as :func:`diagonalize` with S replaced by c + (2ig/c) d_a."""
    grid = s.grid
    S = p.c + (2j * p.g / p.c) * (1j * grid.k)
    W, Q = s.W.spectrum, s.Q.spectrum
    yp = 0.5 * (W - (p.c - S) / (2 * p.g) * Q)
    ym = 0.5 * (W - (p.c + S) / (2 * p.g) * Q)
    return BranchPair(HoloField(grid, yp), HoloField(grid, ym))


def y_minus_ansatz(Yplus: HoloField) -> HoloField:
    """Y- = -2 P[Y+ conj(Y+_a)]."""
    grid = Yplus.grid
    y = _s(grid, Yplus.spectrum)
    ya = _s(grid, K.deriv(grid, Yplus.spectrum))
    return HoloField(grid, -2.0 * _P(grid, y * np.conj(ya)))


# ---------------------------------------------------------------------------
# approximate solution

@dataclass(frozen=True, eq=False)
class ApproxWW:
    state: WWState
    source: YEpsField
    g: HoloField | None = None
    k: HoloField | None = None
    norms: dict | None = None


def _approx_fields(Y: np.ndarray, grid: Grid, p: PhysParams):
    g, c = p.g, p.c
    Ya, Yaa = K.deriv(grid, Y), K.deriv(grid, Y, 2)
    quad = _P(grid, _s(grid, Y) * np.conj(_s(grid, Ya)))
    W = 2 * Y - (2j * g / c ** 2) * Ya - (6 * g ** 2 / c ** 4) * Yaa
    Q = (2 * g / c) * Y - (4j * g ** 2 / c ** 3) * Ya - (12 * g ** 3 / c ** 5) * Yaa + (4 * g / c) * quad
    return W, Q


def _approx_time_derivative(Y: np.ndarray, Yt: np.ndarray, grid: Grid, p: PhysParams):
    g, c = p.g, p.c
    Ya = K.deriv(grid, Y)
    dq = _P(grid, _s(grid, Yt) * np.conj(_s(grid, Ya))
            + _s(grid, Y) * np.conj(_s(grid, K.deriv(grid, Yt))))
    Wt = 2 * Yt - (2j * g / c ** 2) * K.deriv(grid, Yt) - (6 * g ** 2 / c ** 4) * K.deriv(grid, Yt, 2)
    Qt = ((2 * g / c) * Yt - (4j * g ** 2 / c ** 3) * K.deriv(grid, Yt)
          - (12 * g ** 3 / c ** 5) * K.deriv(grid, Yt, 2) + (4 * g / c) * dq)
    return Wt, Qt


def _check_band(y: YEpsField):
    grid = y.grid
    j = grid.index[np.abs(y.Y.spectrum) > 0]
    if j.size and 2 * (-j.min()) > grid.n // 3:
        raise ValueError("grid band cannot hold the quadratic terms of the approximate solution")


def build_approx_ww(y: YEpsField, p: PhysParams, residuals: bool = True) -> ApproxWW:
    """W = 2Y - (2ig/c^2)Y_a - (6g^2/c^4)Y_aa,
    Q = (2g/c)Y - (4ig^2/c^3)Y_a - (12g^3/c^5)Y_aa + (4g/c)P[Y conj(Y_a)]."""
    _check_band(y)
    grid = y.grid
    W, Q = _approx_fields(y.Y.spectrum, grid, p)
    a = ApproxWW(WWState.from_spectra(grid, W, Q, y.t), y)
    if residuals and y.Yt is not None:
        gk, kk, nrm = residual_gk(a, p)
        a = ApproxWW(a.state, y, gk, kk, nrm)
    return a


def residual_gk(a: ApproxWW, p: PhysParams):
    """g = W_t - (water-wave right side for W), k likewise for Q.

    The time derivative is the chain rule through the evolution of Y~.
    Returns (g, k, norms) with norms holding ||g||_{H^1}, ||k||_{Hdot^1/2}
    and their sum under ``total``.
    """
    y = a.source
    if y.Yt is None:
        raise ValueError("residuals need the time derivative of Y~")
    grid = y.grid
    Wt, Qt = _approx_time_derivative(y.Y.spectrum, y.Yt.spectrum, grid, p)
    s = a.state
    try:
        dW, dQ = K.ww_rhs(grid, s.W.spectrum, s.Q.spectrum, p.g, p.c)
    except FloatingPointError as exc:
        raise ValueError(f"approximate state is degenerate: {exc}") from exc
    gsp = np.where(grid.holo_mask, Wt - dW, 0.0)
    ksp = np.where(grid.holo_mask, Qt - dQ, 0.0)
    gf, kf = HoloField(grid, gsp), HoloField(grid, ksp)
    ng, nk = norm(gf, "H", 1), float(np.sqrt(hdot_sq(kf, 0.5)))
    return gf, kf, {"g_H1": ng, "k_Hhalf": nk, "total": ng + nk}


def refine(y: YEpsField, factor: int = 2) -> YEpsField:
    """The same field on a grid ``factor`` times finer (same period)."""
    grid = y.grid
    big = make_grid(grid.n * factor, grid.length)
    pad = lambda f: None if f is None else HoloField(big, pad_spectrum(f.spectrum, big))
    return YEpsField(pad(y.Y), y.t, y.eps, pad(y.Yt), pad(y.f))


# ---------------------------------------------------------------------------
# well-preparedness

def well_preparedness(s: WWState, p: PhysParams, m: int = 3, threshold: float = 10.0) -> dict:
    """Dimensionless frequency-concentration and coupling ratios.

    size      ||(W, Q)||_H / eps^(1/2)
    conc_j    ||d^j (Wd, R)||_H / eps^(j + 3/2), 0 <= j <= m - 1
    coupling  ||W - (c/g) Q||_{Hdot^1/2} / eps^(3/2)
    """
    eps = p.eps
    grid = s.grid
    d = to_diff_vars(s, floor=0.0)
    ratios = {"size": norm((s.W, s.Q), "energy") / eps ** 0.5}
    for j in range(m):
        wj = SpectralField(grid, K.deriv(grid, d.Wd.spectrum, j))
        rj = SpectralField(grid, K.deriv(grid, d.R.spectrum, j))
        ratios[f"conc_{j}"] = norm((wj, rj), "energy") / eps ** (j + 1.5)
    diff = SpectralField(grid, s.W.spectrum - p.c / p.g * s.Q.spectrum)
    ratios["coupling"] = float(np.sqrt(hdot_sq(diff, 0.5))) / eps ** 1.5
    ok = {key: bool(v <= threshold) for key, v in ratios.items()}
    return {"ratios": ratios, "passed": ok, "well_prepared": all(ok.values()),
            "threshold": threshold, "eps": eps, "m": m}
