"""Periodic Fourier toolbox: grids, fields, multipliers, dealiasing and norms.

Spectra are stored in numpy FFT order and normalized so that the coefficient
of mode ``k`` is ``(1/L) * integral_0^L f(a) exp(-i k a) da``; with this
convention ``samples = ifft(spectrum) * n``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np

Multiplier = Union[Callable[[np.ndarray], np.ndarray], np.ndarray, complex, float]

DEALIAS_FRACTION = 2.0 / 3.0


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Equispaced periodic grid with ``n`` points on ``[0, length)``."""

    n: int
    length: float

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or not _is_power_of_two(int(self.n)):
            raise ValueError(f"grid size must be a power of two, got {self.n!r}")
        if self.n < 16:
            raise ValueError(f"grid size must be at least 16, got {self.n}")
        if not self.length > 0:
            raise ValueError(f"period must be positive, got {self.length!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "length", float(self.length))

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / self.length

    @cached_property
    def index(self) -> np.ndarray:
        """Integer mode indices j in FFT order, spanning -n/2 .. n/2-1."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)

    @cached_property
    def k(self) -> np.ndarray:
        return self.dk * self.index

    @cached_property
    def x(self) -> np.ndarray:
        return self.spacing * np.arange(self.n)

    @property
    def kmax(self) -> float:
        """Largest representable |k| (the Nyquist wavenumber)."""
        return self.dk * (self.n // 2)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        return np.abs(self.k) <= DEALIAS_FRACTION * self.kmax

    @cached_property
    def neg_mask(self) -> np.ndarray:
        """Strictly negative, dealiased modes."""
        return (self.index < 0) & self.dealias_mask

    @cached_property
    def holo_mask(self) -> np.ndarray:
        """Nonpositive dealiased modes: the support of holomorphic states."""
        return (self.index <= 0) & self.dealias_mask

    def to_samples(self, spectrum: np.ndarray) -> np.ndarray:
        return np.fft.ifft(spectrum) * self.n

    def to_spectrum(self, samples: np.ndarray) -> np.ndarray:
        return np.fft.fft(samples) / self.n


def make_grid(n: int, length: float) -> Grid:
    return Grid(n, length)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Complex periodic field; the spectrum is authoritative, samples are derived."""

    grid: Grid
    spectrum: np.ndarray

    def __post_init__(self):
        spec = np.asarray(self.spectrum, dtype=np.complex128)
        if spec.shape != (self.grid.n,):
            raise ValueError(f"spectrum shape {spec.shape} does not match grid size {self.grid.n}")
        spec = spec.copy()
        spec.setflags(write=False)
        object.__setattr__(self, "spectrum", spec)

    @classmethod
    def from_samples(cls, grid: Grid, samples) -> "SpectralField":
        samples = np.asarray(samples, dtype=np.complex128)
        return cls(grid, grid.to_spectrum(samples))

    @classmethod
    def from_function(cls, grid: Grid, func: Callable[[np.ndarray], np.ndarray]) -> "SpectralField":
        return cls.from_samples(grid, func(grid.x))

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralField":
        return cls(grid, np.zeros(grid.n, dtype=np.complex128))

    @cached_property
    def samples(self) -> np.ndarray:
        s = self.grid.to_samples(self.spectrum)
        s.setflags(write=False)
        return s

    @property
    def mean(self) -> complex:
        return complex(self.spectrum[0])

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.spectrum), initial=0.0))

    def with_spectrum(self, spectrum: np.ndarray) -> "SpectralField":
        return type(self)(self.grid, spectrum)

    def as_field(self) -> "SpectralField":
        return SpectralField(self.grid, self.spectrum)

    def conj(self) -> "SpectralField":
        """Pointwise complex conjugate (mode k -> conj of mode -k)."""
        return SpectralField(self.grid, np.conj(self.spectrum[(-self.grid.index) % self.grid.n]))

    def _check(self, other: "SpectralField"):
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return SpectralField(self.grid, self.spectrum + other.spectrum)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return SpectralField(self.grid, self.spectrum - other.spectrum)
        return NotImplemented

    def __neg__(self):
        return SpectralField(self.grid, -self.spectrum)

    def __mul__(self, other):
        if np.isscalar(other):
            return SpectralField(self.grid, other * self.spectrum)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if np.isscalar(other):
            return SpectralField(self.grid, self.spectrum / other)
        return NotImplemented

    def __repr__(self):
        return f"{type(self).__name__}(n={self.grid.n}, L={self.grid.length:g}, scale={self.scale:.3e})"


class HoloField(SpectralField):
    """Field supported on nonpositive wavenumbers (holomorphic in the lower half plane)."""

    def __post_init__(self):
        super().__post_init__()
        tol = 1e-12 * max(self.scale, 1e-300)
        bad = np.abs(self.spectrum[self.grid.index > 0])
        if bad.size and bad.max() > tol:
            raise ValueError(
                f"field is not holomorphic: positive-mode amplitude {bad.max():.3e} exceeds {tol:.3e}"
            )

    @classmethod
    def project(cls, f: SpectralField) -> "HoloField":
        """Drop the positive modes of ``f`` and wrap the result."""
        spec = np.where(f.grid.index <= 0, f.spectrum, 0.0)
        return cls(f.grid, spec)


class RealField(SpectralField):
    """Field with conjugate-symmetric spectrum."""

    def __post_init__(self):
        super().__post_init__()
        mirror = np.conj(self.spectrum[(-self.grid.index) % self.grid.n])
        # the Nyquist mode has no partner on the grid; require it real
        err = np.max(np.abs(self.spectrum - mirror), initial=0.0)
        if err > 1e-12 * max(self.scale, 1e-300):
            raise ValueError(f"field is not real: conjugate-symmetry defect {err:.3e}")

    @classmethod
    def from_real_samples(cls, grid: Grid, samples) -> "RealField":
        return cls(grid, grid.to_spectrum(np.asarray(samples, dtype=float)))

    @classmethod
    def symmetrize(cls, f: SpectralField) -> "RealField":
        return cls.from_real_samples(f.grid, f.samples.real)


# ---------------------------------------------------------------------------
# Fourier multipliers

def _symbol(grid: Grid, m: Multiplier) -> np.ndarray:
    if callable(m):
        vals = np.asarray(m(grid.k), dtype=np.complex128)
    else:
        vals = np.asarray(m, dtype=np.complex128)
    vals = np.broadcast_to(vals, (grid.n,))
    if not np.all(np.isfinite(vals)):
        raise ValueError("multiplier is not finite at every grid wavenumber")
    return vals


def multiplier_apply(f: SpectralField, m: Multiplier) -> SpectralField:
    """Multiply the spectrum of ``f`` by the symbol ``m(k)``."""
    return SpectralField(f.grid, f.spectrum * _symbol(f.grid, m))


def hilbert_symbol(k: np.ndarray) -> np.ndarray:
    return -1j * np.sign(k)


def neg_symbol(k: np.ndarray) -> np.ndarray:
    return np.where(k < 0, 1.0, np.where(k == 0, 0.5, 0.0))


def pos_symbol(k: np.ndarray) -> np.ndarray:
    return 1.0 - neg_symbol(k)


def hilbert(f: SpectralField) -> SpectralField:
    return multiplier_apply(f, hilbert_symbol)


def project_neg(f: SpectralField) -> SpectralField:
    """P = (I - iH)/2: keeps k < 0, halves k = 0."""
    return multiplier_apply(f, neg_symbol)


def project_pos(f: SpectralField) -> SpectralField:
    return multiplier_apply(f, pos_symbol)


def derivative(f: SpectralField, order: int = 1) -> SpectralField:
    return multiplier_apply(f, lambda k: (1j * k) ** order)


def antiderivative(f: SpectralField) -> SpectralField:
    """Zero-mean inverse of d/da; the k = 0 mode is discarded."""
    return multiplier_apply(f, lambda k: np.where(k == 0, 0.0, 1.0 / np.where(k == 0, 1.0, 1j * k)))


def abs_derivative(f: SpectralField, s: float) -> SpectralField:
    """|D|^s; for s < 0 the zero mode is discarded."""
    def sym(k):
        ak = np.abs(k)
        if s >= 0:
            return ak ** s
        return np.where(ak == 0, 0.0, np.where(ak == 0, 1.0, ak) ** s)
    return multiplier_apply(f, sym)


def lowpass(f: SpectralField, cutoff: float) -> SpectralField:
    """Sharp cutoff keeping |k| <= cutoff."""
    if not cutoff > 0:
        raise ValueError(f"cutoff must be positive, got {cutoff!r}")
    # a relative slack keeps modes sitting exactly on the cutoff
    keep = np.abs(f.grid.k) <= cutoff * (1 + 1e-12)
    return SpectralField(f.grid, np.where(keep, f.spectrum, 0.0))


def dealias(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, np.where(f.grid.dealias_mask, f.spectrum, 0.0))


# ---------------------------------------------------------------------------
# products

def product(f: SpectralField, g: SpectralField, dealiased: bool = True) -> SpectralField:
    """Pointwise product computed on the grid; optionally 2/3-rule filtered."""
    f._check(g)
    h = SpectralField.from_samples(f.grid, f.samples * g.samples)
    return dealias(h) if dealiased else h


def padded_product(f: SpectralField, g: SpectralField, factor: int = 2) -> SpectralField:
    """Exact product of two band-limited fields via zero padding.

    The result is truncated back to the original grid; modes beyond the
    original Nyquist are lost but nothing aliases.
    """
    f._check(g)
    grid = f.grid
    big = Grid(grid.n * factor, grid.length)
    fb = pad_spectrum(f.spectrum, big)
    gb = pad_spectrum(g.spectrum, big)
    hb = big.to_spectrum(big.to_samples(fb) * big.to_samples(gb))
    return SpectralField(grid, truncate_spectrum(hb, grid))


def pad_spectrum(spec: np.ndarray, big: Grid) -> np.ndarray:
    """Embed an FFT-ordered spectrum into a larger grid with the same period."""
    n = spec.shape[0]
    out = np.zeros(big.n, dtype=np.complex128)
    half = n // 2
    out[:half] = spec[:half]
    # the Nyquist mode -n/2 keeps its index on the larger grid
    out[big.n - half:] = spec[half:]
    return out


def truncate_spectrum(spec_big: np.ndarray, grid: Grid) -> np.ndarray:
    n = grid.n
    half = n // 2
    out = np.empty(n, dtype=np.complex128)
    out[:half] = spec_big[:half]
    out[half:] = spec_big[spec_big.shape[0] - half:]
    return out


# ---------------------------------------------------------------------------
# quadrature and norms

def integrate(f: SpectralField) -> complex:
    """Trapezoid quadrature over one period (exact for band-limited integrands)."""
    return complex(f.grid.length * f.spectrum[0])


def hdot_sq(f: SpectralField, s: float) -> float:
    k = np.abs(f.grid.k)
    nz = k > 0
    return float(f.grid.length * np.sum(k[nz] ** (2 * s) * np.abs(f.spectrum[nz]) ** 2))


def _check_mean(f: SpectralField, s: float):
    if s < 0 and abs(f.mean) > 1e-12 * max(f.scale, 1e-300):
        raise ValueError(f"negative-order homogeneous norm (s={s}) needs a zero-mean field")


def norm(f, which: str = "L2", order: float | None = None) -> float:
    """Plancherel-based norms.

    ``which`` is one of ``L2``, ``Hdot`` (order s), ``H`` (integer order m),
    ``Linf``, ``energy`` (pair, L2 x Hdot^1/2) or ``hdot_energy`` (pair,
    order n: the energy norm of the n-th derivatives).
    """
    if which == "L2":
        return float(np.sqrt(f.grid.length * np.sum(np.abs(f.spectrum) ** 2)))
    if which == "Hdot":
        s = 0.0 if order is None else float(order)
        _check_mean(f, s)
        return float(np.sqrt(hdot_sq(f, s)))
    if which == "H":
        m = 0 if order is None else int(order)
        k2 = f.grid.k ** 2
        weight = sum(k2 ** j for j in range(m + 1))
        return float(np.sqrt(f.grid.length * np.sum(weight * np.abs(f.spectrum) ** 2)))
    if which == "Linf":
        return float(np.max(np.abs(f.samples)))
    if which == "energy":
        w, q = f
        return float(np.sqrt(norm(w, "L2") ** 2 + hdot_sq(q, 0.5)))
    if which == "hdot_energy":
        w, q = f
        n = 0 if order is None else int(order)
        return float(np.sqrt(_hdot_energy_sq(w, q, n)))
    raise ValueError(f"unknown norm {which!r}")


def _hdot_energy_sq(w: SpectralField, r: SpectralField, n: int) -> float:
    L = w.grid.length
    k = np.abs(w.grid.k)
    a = L * np.sum(k ** (2 * n) * np.abs(w.spectrum) ** 2)
    b = L * np.sum(k ** (2 * n + 1) * np.abs(r.spectrum) ** 2)
    return float(a + b)


def energy_norm(w: SpectralField, q: SpectralField) -> float:
    return norm((w, q), "energy")


def hdot_energy_norm(w: SpectralField, r: SpectralField, n: int) -> float:
    return float(np.sqrt(_hdot_energy_sq(w, r, n)))
