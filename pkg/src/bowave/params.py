from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class PhysParams:
    """Physical and scaling parameters shared by every solver.

    ``lam`` is the Benjamin-Ono coupling; the water-wave correspondence
    needs ``lam == c``, which is the default when it is left as ``None``.
    """

    g: float = 1.0
    c: float = 1.0
    eps: float = 0.1
    b: float = 1.0
    T: float = 0.5
    lam: float | None = None

    def __post_init__(self):
        for name in ("g", "c", "b", "T"):
            val = getattr(self, name)
            if not val > 0:
                raise ValueError(f"{name} must be positive, got {val!r}")
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps!r}")
        if self.lam is None:
            object.__setattr__(self, "lam", float(self.c))

    def with_eps(self, eps: float) -> "PhysParams":
        return replace(self, eps=eps)

    @property
    def cutoff(self) -> float:
        """Benjamin-Ono truncation wavenumber b / eps."""
        return self.b / self.eps

    @property
    def dispersion(self) -> float:
        """Benjamin-Ono dispersion coefficient g^2 / c^3."""
        return self.g ** 2 / self.c ** 3

    @property
    def group_velocity(self) -> float:
        return self.g / self.c
