"""Smooth compactly supported bump profiles.

All densities and averaging weights in the package are built from one
ingredient: the classical C-infinity step

    h(x) = exp(-1/x) for x > 0,  h(x) = 0 otherwise,
    g(x) = h(1-x) / (h(x) + h(1-x)),

which equals 1 for x <= 0 and 0 for x >= 1.  A ``Bump1D`` applies g to
(|s - center| - inner) / (outer - inner), so it is identically 1 on the
inner interval and identically 0 outside the outer one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["smooth_step", "Bump1D", "BumpProfile", "TensorBump"]


def smooth_step(x):
    """C-infinity transition: 1 for x <= 0, 0 for x >= 1, strictly between otherwise."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    out[x <= 0.0] = 1.0
    mid = (x > 0.0) & (x < 1.0)
    if np.any(mid):
        xm = x[mid]
        ha = np.exp(-1.0 / xm)
        hb = np.exp(-1.0 / (1.0 - xm))
        out[mid] = hb / (ha + hb)
    return out


@dataclass(frozen=True)
class Bump1D:
    """Even smooth bump around ``center``: 1 on |s-center| <= inner, 0 beyond outer."""

    center: float
    inner: float
    outer: float

    def __post_init__(self):
        if not (0.0 < self.inner < self.outer):
            raise ValueError("need 0 < inner < outer")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return smooth_step((np.abs(s - self.center) - self.inner) / (self.outer - self.inner))

    @property
    def support(self) -> tuple[float, float]:
        return (self.center - self.outer, self.center + self.outer)

    def mass(self, nodes: int = 4096) -> float:
        """Total integral, by fine midpoint quadrature over the support."""
        a, b = self.support
        s = a + (b - a) * (np.arange(nodes) + 0.5) / nodes
        return float(np.sum(self(s)) * (b - a) / nodes)


class BumpProfile(Bump1D):
    """Centered bump with inner radius c: 1 on |s| <= c, 0 on |s| >= 2c."""

    def __init__(self, inner_radius: float):
        super().__init__(center=0.0, inner=float(inner_radius), outer=2.0 * float(inner_radius))

    @property
    def inner_radius(self) -> float:
        return self.inner


@dataclass(frozen=True)
class TensorBump:
    """Tensor product of per-axis bumps; a smooth density on a box in R^d."""

    factors: tuple[Bump1D, ...]

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        out = np.ones(p.shape[:-1], dtype=float)
        for i, f in enumerate(self.factors):
            out = out * f(p[..., i])
        return out

    @property
    def dim(self) -> int:
        return len(self.factors)

    @property
    def support_lo(self) -> np.ndarray:
        return np.array([f.support[0] for f in self.factors])

    @property
    def support_hi(self) -> np.ndarray:
        return np.array([f.support[1] for f in self.factors])

    def mass(self) -> float:
        out = 1.0
        for f in self.factors:
            out *= f.mass()
        return out
