"""Benjamin-Ono approximation of constant-vorticity water waves, numerically.

Modules: ``spectral`` (periodic Fourier fields and multipliers), ``bo``
(Benjamin-Ono solver and the rescaled field Y~), ``wavetank`` (holomorphic
water-wave solver and its differentiated/linearized forms), ``bridge``
(approximate water waves built from Y~), ``energy`` (conserved quantities
and energy estimates) and ``harness`` (sweeps, records, CLI).
"""
__version__ = "0.1.0"

from .params import PhysParams  # noqa: E402

__all__ = ["PhysParams", "__version__"]
