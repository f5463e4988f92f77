"""Axis-aligned boxes in parameter space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Box"]


@dataclass(frozen=True)
class Box:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("lo/hi length mismatch")
        if any(a >= b for a, b in zip(self.lo, self.hi)):
            raise ValueError("need lo < hi on every axis")

    @classmethod
    def make(cls, lo, hi) -> "Box":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        return cls(tuple(lo.tolist()), tuple(hi.tolist()))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def lengths(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.hi) + np.asarray(self.lo))

    @property
    def halfwidth(self) -> np.ndarray:
        return 0.5 * self.lengths

    def contains(self, p, pad: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= np.asarray(self.lo) - pad) and np.all(p <= np.asarray(self.hi) + pad))

    def grid(self, n_per_axis: int) -> np.ndarray:
        """Regular grid of shape (n^dim, dim) including the box faces."""
        axes = [np.linspace(a, b, n_per_axis) for a, b in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.random((n, self.dim))
        return np.asarray(self.lo) + u * self.lengths

    def shrunk(self, factor: float) -> "Box":
        c, h = self.center, self.halfwidth * factor
        return Box.make(c - h, c + h)
