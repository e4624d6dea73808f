"""Conserved quantities, control norms and cubic energy diagnostics.

Integrals of products are evaluated on a zero-padded grid (or by Parseval),
so they are exact for band-limited inputs.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from . import _kernels as K
from .params import PhysParams
from .spectral import Grid, SpectralField, pad_spectrum
from .wavetank import DiffState, LinState, WWState, diff_aux, jacobian_min, to_diff_vars


def _padded(grid: Grid, factor: int = 2) -> Grid:
    return Grid(grid.n * factor, grid.length)


def _up(big: Grid, spec) -> tuple[np.ndarray, np.ndarray]:
    """Samples of a spectrum and of its derivative on the padded grid."""
    s = pad_spectrum(spec, big)
    return big.to_samples(s), big.to_samples(1j * big.k * s)


def _int(grid: Grid, samples) -> float:
    return float(np.real(np.mean(samples)) * grid.length)


def _parseval(a: np.ndarray, b: np.ndarray, L: float) -> complex:
    """Integral of A*B from spectra a, b (FFT order)."""
    n = a.shape[0]
    return complex(L * np.sum(a * b[(-np.arange(n)) % n]))


# ---------------------------------------------------------------------------
# conserved quantities of the nonlinear flow

def hamiltonian(s: WWState, p: PhysParams) -> float:
    """Energy of the constant-vorticity flow.

    With y = Im W and x_a = 1 + Re W_a this is
    int 2g y^2 x_a - i Q conj(Q_a) + 2c y^2 Re Q_a + (2/3) c^2 y^3 x_a.
    """
    big = _padded(s.grid)
    w, wa = _up(big, s.W.spectrum)
    q, qa = _up(big, s.Q.spectrum)
    y = w.imag
    xa = 1.0 + wa.real
    dens = (2.0 * p.g * y ** 2 * xa + np.real(-1j * q * np.conj(qa))
            + 2.0 * p.c * y ** 2 * qa.real + (2.0 / 3.0) * p.c ** 2 * y ** 3 * xa)
    return _int(big, dens)


def momentum(s: WWState, p: PhysParams) -> float:
    """Horizontal momentum int (conj(Q) W_a - Q conj(W_a))/i - 2c y^2 x_a.

    For zero-mean W the vorticity part equals -c|W|^2 + (c/2)(W^2 conj(W_a) + cc);
    the form used here stays conserved when the mean of W moves.
    """
    big = _padded(s.grid)
    w, wa = _up(big, s.W.spectrum)
    q, _ = _up(big, s.Q.spectrum)
    x = np.conj(q) * wa
    dens = 2.0 * x.imag - 2.0 * p.c * w.imag ** 2 * (1.0 + wa.real)
    return _int(big, dens)


def momentum_zero_mean_form(s: WWState, p: PhysParams) -> float:
    """The momentum written for zero-mean W: int 2 Im(conj(Q) W_a) - c|W|^2 + c Re(W^2 conj(W_a))."""
    big = _padded(s.grid)
    w, wa = _up(big, s.W.spectrum)
    q, _ = _up(big, s.Q.spectrum)
    dens = 2.0 * np.imag(np.conj(q) * wa) - p.c * np.abs(w) ** 2 + p.c * np.real(w ** 2 * np.conj(wa))
    return _int(big, dens)


def mass(s: WWState) -> float:
    """int Im W (1 + Re W_a): the fluid area above the reference level."""
    big = _padded(s.grid)
    w, wa = _up(big, s.W.spectrum)
    return _int(big, w.imag * (1.0 + wa.real))


# ---------------------------------------------------------------------------
# linear flow

def linear_energy(w: SpectralField, q: SpectralField, p: PhysParams) -> float:
    """E0 = g ||w||^2 + ||q||^2 in Hdot^1/2."""
    L = w.grid.length
    k = np.abs(w.grid.k)
    return float(L * (p.g * np.sum(np.abs(w.spectrum) ** 2) + np.sum(k * np.abs(q.spectrum) ** 2)))


def linear_momentum(w: SpectralField, q: SpectralField, p: PhysParams) -> float:
    """P0 = int (conj(q) w_a - q conj(w_a))/i - c|w|^2."""
    L = w.grid.length
    x = L * np.sum(np.conj(q.spectrum) * 1j * w.grid.k * w.spectrum)
    return float(2.0 * x.imag - p.c * L * np.sum(np.abs(w.spectrum) ** 2))


# ---------------------------------------------------------------------------
# control norms

def _linf(x) -> float:
    return float(np.max(np.abs(x)))


def dyadic_blocks(grid: Grid):
    """Masks of dyadic annuli 2^j <= |index| < 2^(j+1), plus the zero mode block."""
    idx = np.abs(grid.index)
    blocks = [idx == 0]
    j = 0
    while 2 ** j <= idx.max():
        blocks.append((idx >= 2 ** j) & (idx < 2 ** (j + 1)))
        j += 1
    return blocks


def besov_linf(f: SpectralField) -> float:
    """L^inf plus the l^2 sum of dyadic block sup norms (B^0_{inf,2} surrogate)."""
    grid = f.grid
    blocks = [_linf(grid.to_samples(np.where(m, f.spectrum, 0.0))) for m in dyadic_blocks(grid)]
    return _linf(f.samples) + float(np.sqrt(np.sum(np.square(blocks))))


def _half_deriv(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, np.sqrt(np.abs(f.grid.k)) * f.spectrum)


@dataclass(frozen=True)
class ControlNorms:
    A: float
    B: float
    A_half: float
    A_one: float
    A_bar: float
    B_bar: float


def control_norms(d: DiffState, s: WWState, p: PhysParams) -> ControlNorms:
    """Control norms with L^inf in place of BMO and the dyadic Besov surrogate."""
    grid = s.grid
    Wd, R = d.Wd, d.R
    Y = Wd.samples / (1.0 + Wd.samples)
    A = _linf(Wd.samples) + _linf(Y) + besov_linf(_half_deriv(R))
    Ra = SpectralField(grid, 1j * grid.k * R.spectrum)
    B = _linf(_half_deriv(Wd).samples) + _linf(Ra.samples)
    A_half = _linf(_half_deriv(s.W).samples) + _linf(R.samples)
    A_one = _linf(s.W.samples)
    c = p.c
    return ControlNorms(A=A, B=B, A_half=A_half, A_one=A_one,
                        A_bar=A + c * A_half + c ** 2 * A_one,
                        B_bar=B + c * A + c ** 2 * A_half)


# ---------------------------------------------------------------------------
# linearized energy

def e_lin3(l: LinState, s: WWState, d: DiffState | None, p: PhysParams) -> float:
    """int (g + a)|w|^2 + Im(r conj(r_a)) + 2 Im(R w r_a) - 2 Re(conj(Wd) w^2)."""
    if d is None or d.au is None:
        d = diff_aux(to_diff_vars(s, floor=0.0), p)
    big = _padded(s.grid)
    w, _ = _up(big, l.w.spectrum)
    r, ra = _up(big, l.r.spectrum)
    R, _ = _up(big, d.R.spectrum)
    Wd, _ = _up(big, d.Wd.spectrum)
    au, _ = _up(big, d.au.spectrum)
    dens = ((p.g + au.real) * np.abs(w) ** 2 + np.imag(r * np.conj(ra))
            + 2.0 * np.imag(R * w * ra) - 2.0 * np.real(np.conj(Wd) * w ** 2))
    return _int(big, dens)


# ---------------------------------------------------------------------------
# cubic energy components

def _pd(spec, grid, order):
    return (1j * grid.k) ** order * spec


def _inv(spec, grid):
    k = grid.k
    return np.where(k == 0, 0.0, spec / np.where(k == 0, 1.0, 1j * k))


def cubic_components(d: DiffState, s: WWState, p: PhysParams, n: int = 0, use_R: bool = True):
    """The five low-frequency components I_0..I_4 of the order-n cubic energy.

    Each term is int conj(A) d^{n+1}[X] with X a quadratic product; X is formed
    on a padded grid and the integral by Parseval, so everything is exact for
    band-limited fields. With ``use_R`` the factors Q_a are replaced by R.
    """
    if n < 0:
        raise ValueError("order n must be nonnegative")
    grid = s.grid
    big = _padded(grid)
    L = grid.length
    g, c = p.g, p.c

    def up(spec):
        return big.to_samples(pad_spectrum(spec, big))

    W = s.W.spectrum
    Q = s.Q.spectrum
    Qa = d.R.spectrum if use_R else _pd(Q, grid, 1)
    Wd = d.Wd.spectrum
    cj = lambda spec: np.conj(spec[(-np.arange(grid.n)) % grid.n])
    Wb, Qb = cj(W), cj(Q)
    iW = _inv(W, grid)
    iWb = cj(iW)

    def prod(a, b):
        x = up(a) * up(b)
        return np.fft.fft(x) / big.n

    def term(A_spec, X_big):
        """int A * d^{n+1} X with A given on the coarse grid, X on the padded one."""
        Ab = pad_spectrum(A_spec, big)
        Xd = (1j * big.k) ** (n + 1) * X_big
        return _parseval(Ab, Xd, L)

    cWn = cj(_pd(Wd, grid, n))            # conj(Wd^{(n)})
    cQn2 = cj(_pd(Qa, grid, n + 1))        # conj(Q^{(n+2)}) with Q_a -> R if requested
    WpWb = W + Wb

    I0 = 2.0 * np.real(-term(cWn, prod(WpWb, Wd)) + 1j * term(cQn2, prod(WpWb, Qa)))

    X1 = prod(Wd, Q + Qb) + prod(Qa, WpWb)
    X2 = 0.5 * prod(W, W) + prod(W, Wb)
    X3 = prod(Q, Qa) + prod(Qb, Qa)
    I1 = c * np.real(-term(cWn, X1) + term(cQn2, X2) + (1j / g) * term(cQn2, X3))

    Y1 = prod(Wd, iW - iWb) + prod(W, W) + 0.5 * prod(W, Wb)
    I2 = c ** 2 * np.real(1j * term(cWn, Y1) - (1.0 / (2 * g)) * term(cWn, X3)
                          + (1.0 / g) * term(cQn2, prod(Qa, iW - iWb))
                          + (1.0 / (2 * g)) * term(cQn2, prod(W, Q) + prod(W, Qb)))

    I3 = (c ** 3 / (2 * g)) * np.imag(term(cQn2, prod(iW - iWb, W))
                                      - term(cWn, prod(W, Q + Qb) + prod(iW - iWb, Qa)))

    Wn = _pd(Wd, grid, n)
    I4 = (c ** 4 / (2 * g ** 2)) * np.real(term(Wn, prod(iW - iWb, W)))
    return tuple(float(x) for x in (I0, I1, I2, I3, I4))


# ---------------------------------------------------------------------------
# reports

def hdot_energy_sq(d: DiffState, n: int) -> float:
    """||(Wd, R)||^2 in the order-n homogeneous energy space."""
    L = d.grid.length
    k = np.abs(d.grid.k)
    return float(L * np.sum(k ** (2 * n) * np.abs(d.Wd.spectrum) ** 2
                            + k ** (2 * n + 1) * np.abs(d.R.spectrum) ** 2))


def refined_bound(cn: ControlNorms, p: PhysParams, En: float, En1: float) -> float:
    """Right side of the refined cubic growth bound without its constant."""
    c = p.c
    A, B, Ah, A1 = cn.A, cn.B, cn.A_half, cn.A_one
    coef = (c ** 2 * A * B + c ** 3 * A ** 2 + c ** 3 * B * Ah + c ** 4 * A * Ah
            + c ** 4 * A1 * B + c ** 5 * A * A1)
    return coef * np.sqrt(max(En, 0.0) * max(En1, 0.0)) + cn.A_bar * cn.B_bar * En


def refined_estimate_audit(trajectory: Sequence[WWState], p: PhysParams, n: int = 1) -> dict:
    """Compare the growth of the order-n energy norm with the refined bound.

    ``constant`` is max |d/dt E_n| / bound over interior checkpoints (centred
    differences); ``norm_ratio`` is max_t ||(Wd,R)(t)|| / ||(Wd,R)(0)||.
    """
    if len(trajectory) < 3:
        raise ValueError("need at least three checkpoints")
    t = np.array([s.t for s in trajectory])
    En, bound = [], []
    for s in trajectory:
        d = to_diff_vars(s, floor=0.0)
        e = hdot_energy_sq(d, n)
        e1 = hdot_energy_sq(d, n - 1) if n >= 1 else hamiltonian(s, p)
        En.append(e)
        bound.append(refined_bound(control_norms(d, s, p), p, e, e1))
    En = np.array(En)
    bound = np.array(bound)
    rate = np.gradient(En, t)
    inner = slice(1, -1)
    growth = np.abs(rate[inner])
    b = bound[inner]
    ok = b > 0
    const = float(np.max(growth[ok] / b[ok])) if np.any(ok) else 0.0
    base = np.sqrt(En[0]) if En[0] > 0 else 1.0
    return {
        "n": n,
        "constant": const,
        "max_rate": float(np.max(growth)) if growth.size else 0.0,
        "norm_ratio": float(np.max(np.sqrt(En)) / base) if En[0] > 0 else 0.0,
        "times": t.tolist(),
        "norm_sq": En.tolist(),
    }


REPORT_COLUMNS = ("t", "energy", "momentum", "E0", "mass", "I0", "I1", "I2", "I3", "I4",
                  "A", "B", "A_half", "A_one", "A_bar", "B_bar", "taylor_min", "jacobian_min")


@dataclass(frozen=True)
class EnergyReport:
    t: float
    energy: float
    momentum: float
    E0: float
    mass: float
    I0: float
    I1: float
    I2: float
    I3: float
    I4: float
    A: float
    B: float
    A_half: float
    A_one: float
    A_bar: float
    B_bar: float
    taylor_min: float
    jacobian_min: float
    surrogate: str = "BMO->Linf; B0_inf2->dyadic block sup l2"

    def row(self) -> list:
        d = asdict(self)
        return [d[c] for c in REPORT_COLUMNS]


def energy_report(s: WWState, p: PhysParams, n: int = 0) -> EnergyReport:
    d = diff_aux(to_diff_vars(s, floor=0.0), p)
    cn = control_norms(d, s, p)
    I = cubic_components(d, s, p, n)
    return EnergyReport(
        t=s.t, energy=hamiltonian(s, p), momentum=momentum(s, p),
        E0=linear_energy(s.W, s.Q, p), mass=mass(s),
        I0=I[0], I1=I[1], I2=I[2], I3=I[3], I4=I[4],
        A=cn.A, B=cn.B, A_half=cn.A_half, A_one=cn.A_one, A_bar=cn.A_bar, B_bar=cn.B_bar,
        taylor_min=float(np.min(p.g + d.au.samples.real)), jacobian_min=jacobian_min(s),
    )
