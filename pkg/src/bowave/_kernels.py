"""Array-level kernels for the holomorphic water-wave system.

Spectra are FFT-ordered. Holomorphic fields live on the modes with index <= 0
inside the 2/3 band (``Grid.holo_mask``); the k = 0 mode is allowed because
the exact flow moves the means of W and Q (mass is carried by Im mean W).

Conventions, fixed so that the discrete flow conserves energy, momentum and
mass exactly:

* ``P`` is ``(I - iH)/2``: it keeps k < 0 and halves the mean.
* products of holomorphic factors are taken as they are (no projection).

The right-hand side is written once on :class:`Dual` numbers so the same code
gives both the flow and its exact linearization.
"""
from __future__ import annotations

import numpy as np

from .spectral import Grid


class Dual:
    """Pair (value, tangent) of sampled complex fields; tangent may be absent."""

    __slots__ = ("v", "d")

    def __init__(self, v, d=None):
        self.v = v
        self.d = d

    @staticmethod
    def _lift(x):
        return x if isinstance(x, Dual) else Dual(x)

    def __add__(self, o):
        o = Dual._lift(o)
        return Dual(self.v + o.v, _dadd(self.d, o.d))

    __radd__ = __add__

    def __sub__(self, o):
        o = Dual._lift(o)
        return Dual(self.v - o.v, _dadd(self.d, None if o.d is None else -o.d))

    def __rsub__(self, o):
        return Dual._lift(o) - self

    def __neg__(self):
        return Dual(-self.v, None if self.d is None else -self.d)

    def __mul__(self, o):
        o = Dual._lift(o)
        d = _dadd(None if self.d is None else self.d * o.v, None if o.d is None else self.v * o.d)
        return Dual(self.v * o.v, d)

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = Dual._lift(o)
        v = self.v / o.v
        d = _dadd(None if self.d is None else self.d / o.v, None if o.d is None else -v * o.d / o.v)
        return Dual(v, d)

    def conj(self):
        return Dual(np.conj(self.v), None if self.d is None else np.conj(self.d))

    def linear(self, op):
        return Dual(op(self.v), None if self.d is None else op(self.d))


def _dadd(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


# ---------------------------------------------------------------------------
# spectral helpers (plain arrays)

def proj(grid: Grid, spec: np.ndarray) -> np.ndarray:
    """``P`` on a spectrum, restricted to the dealiased band."""
    out = np.where(grid.neg_mask, spec, 0.0)
    out[0] = 0.5 * spec[0]
    return out


def proj_bar(grid: Grid, spec: np.ndarray) -> np.ndarray:
    """``conj(P)``: keeps k > 0 and halves the mean."""
    out = np.where(grid.dealias_mask & (grid.index > 0), spec, 0.0)
    out[0] = 0.5 * spec[0]
    return out


def holo(grid: Grid, spec: np.ndarray) -> np.ndarray:
    """Keep the holomorphic band (index <= 0, dealiased) unchanged."""
    return np.where(grid.holo_mask, spec, 0.0)


def deriv(grid: Grid, spec: np.ndarray, order: int = 1) -> np.ndarray:
    return (1j * grid.k) ** order * spec


# ---------------------------------------------------------------------------
# sample-space operators lifted to Dual

def _sp(grid, op):
    """Wrap a spectral operator as a map on samples."""
    return lambda s: grid.to_samples(op(grid.to_spectrum(s)))


def P(grid: Grid, f: Dual) -> Dual:
    return f.linear(_sp(grid, lambda s: proj(grid, s)))


def Pbar(grid: Grid, f: Dual) -> Dual:
    return f.linear(_sp(grid, lambda s: proj_bar(grid, s)))


def band(grid: Grid, f: Dual) -> Dual:
    """Projection of a product of holomorphic factors back onto the band."""
    return f.linear(_sp(grid, lambda s: holo(grid, s)))


def D(grid: Grid, f: Dual) -> Dual:
    return f.linear(_sp(grid, lambda s: deriv(grid, s)))


def lift(grid: Grid, spec, tangent=None) -> Dual:
    return Dual(grid.to_samples(spec), None if tangent is None else grid.to_samples(tangent))


def lower(grid: Grid, f: Dual):
    spec = holo(grid, grid.to_spectrum(f.v))
    tan = None if f.d is None else holo(grid, grid.to_spectrum(f.d))
    return spec, tan


# ---------------------------------------------------------------------------
# water waves

DEGENERACY_FLOOR = 0.0


class Aux:
    """Auxiliary fields J, F, F1, Fu = F - i(c/2)F1 and T1 in sample space."""

    def __init__(self, grid: Grid, W: Dual, Wa: Dual, Qa: Dual, c: float):
        one_wa = 1.0 + Wa
        m = np.min(np.abs(one_wa.v))
        if not m > DEGENERACY_FLOOR or not np.isfinite(m):
            raise FloatingPointError("interface degeneracy: 1 + W_a vanishes")
        cW, cWa, cQa = W.conj(), Wa.conj(), Qa.conj()
        self.one_wa = one_wa
        self.J = one_wa * one_wa.conj()
        self.F = P(grid, (Qa - cQa) / self.J)
        self.F1 = P(grid, W / (1.0 + cWa) + cW / one_wa)
        self.T1 = P(grid, W * cQa / (1.0 + cWa) - cW * Qa / one_wa)
        self.Fu = self.F - (0.5j * c) * self.F1


def _rhs_dual(grid: Grid, W: Dual, Q: Dual, g: float, c: float):
    Wa, Qa = D(grid, W), D(grid, Q)
    a = Aux(grid, W, Wa, Qa, c)
    dW = -band(grid, a.one_wa * a.Fu) - (0.5j * c) * W
    dQ = ((1j * g) * W - band(grid, a.Fu * Qa) - (1j * c) * Q
          - P(grid, Qa * Qa.conj() / a.J) + (0.5j * c) * a.T1)
    return dW, dQ, a


def ww_rhs(grid: Grid, W: np.ndarray, Q: np.ndarray, g: float, c: float):
    """Right side of the constant-vorticity system on spectra; returns (dW, dQ)."""
    dW, dQ, _ = _rhs_dual(grid, lift(grid, W), lift(grid, Q), g, c)
    return lower(grid, dW)[0], lower(grid, dQ)[0]


def ww_rhs_tangent(grid: Grid, W, Q, w, q, g: float, c: float):
    """Right side and its exact directional derivative along (w, q)."""
    dW, dQ, _ = _rhs_dual(grid, lift(grid, W, w), lift(grid, Q, q), g, c)
    (a, da), (b, db) = lower(grid, dW), lower(grid, dQ)
    return a, b, da, db


def aux_fields(grid: Grid, W, Q, c: float):
    Wd = lift(grid, W)
    return Aux(grid, Wd, D(grid, Wd), D(grid, lift(grid, Q)), c)


# ---------------------------------------------------------------------------
# linear part

def linear_matrix(grid: Grid, g: float, c: float):
    """Entries of M = [[0, -ik], [ig, -ic]] per mode (zero off the band)."""
    m = grid.holo_mask
    zero = np.zeros(grid.n, dtype=complex)
    return (zero, np.where(m, -1j * grid.k, 0.0),
            np.where(m, 1j * g, 0.0) + zero, np.where(m, -1j * c, 0.0) + zero)


def linear_apply(grid: Grid, W, Q, g: float, c: float, include_mean: bool = True):
    a, b, cc, d = linear_matrix(grid, g, c)
    if not include_mean:
        b, cc, d = b.copy(), cc.copy(), d.copy()
        b[0] = cc[0] = d[0] = 0.0
    return a * W + b * Q, cc * W + d * Q


def exp_sym(grid: Grid, g: float, c: float, t: float):
    """Entries of exp(M t) per mode by Sylvester's formula.

    The eigenvalues are i*tau with tau^2 + c tau + g k = 0; their difference
    i*sqrt(c^2 - 4 g k) never vanishes on k <= 0, so the formula is regular.
    """
    k = grid.k
    disc = np.sqrt(np.maximum(c * c - 4.0 * g * k, 0.0))
    l1 = 0.5j * (-c + disc)
    l2 = 0.5j * (-c - disc)
    e1, e2 = np.exp(l1 * t), np.exp(l2 * t)
    m = grid.holo_mask
    dl = np.where(m, l1 - l2, 1.0)
    s = (e1 - e2) / dl
    # exp(Mt) = (e1 (M - l2) - e2 (M - l1)) / (l1 - l2) = s M + (e2 l1 - e1 l2)/dl
    base = (e2 * l1 - e1 * l2) / dl
    a = np.where(m, base, 0.0)
    b = np.where(m, s * (-1j * k), 0.0)
    cc = np.where(m, s * (1j * g), 0.0)
    d = np.where(m, base + s * (-1j * c), 0.0)
    return a, b, cc, d


class Propagator:
    """exp(M t) on the band; the mean mode is left to the nonlinear part.

    With ``include_mean`` the k = 0 block of M is exponentiated as well, which
    is the exact flow of the linearized system.
    """

    def __init__(self, grid: Grid, g: float, c: float, t: float, include_mean: bool = False):
        a, b, cc, d = exp_sym(grid, g, c, t)
        if not include_mean:
            a[0], b[0], cc[0], d[0] = 1.0, 0.0, 0.0, 1.0
        self.a, self.b, self.c, self.d = a, b, cc, d

    def __call__(self, W, Q):
        return self.a * W + self.b * Q, self.c * W + self.d * Q
