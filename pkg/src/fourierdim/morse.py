"""Numerical Morse normalization: f = Q_{m,n} composed with a coordinate change.

Around a nondegenerate critical point z0 with f(z0) = 0 and grad f(z0) = 0,
the classical inductive construction produces tau with

    f(x) = sum_{j<=m} tau_j(x)^2 - sum_{j>m} tau_j(x)^2,

one coordinate per step: rotate the remaining coordinates to diagonalize the
Hessian of the remainder at 0, then absorb one variable with the square-root
substitution

    z_r = sqrt(|f_rr|) * (y_r + sum_{j>r} y_j f_jr / f_rr),

which is an exact completion of the square; the remainder coefficients update
by the Schur complement f_jk - f_jr f_kr / f_rr.  The only numerics beyond
floating point are the integral-remainder coefficients

    H_jk(y) = integral_0^1 (1-s) d2f/dy_j dy_k (z0 + s y) ds,

evaluated with a fixed 32-node Gauss-Legendre rule, so the reconstruction
identity holds to quadrature accuracy on the validity box.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .box import Box
from .errors import DegenerateCritical, ValidityCollapse

__all__ = ["MorseNormalization", "morse_normalize", "quadratic_normal_form"]

_GL32 = np.polynomial.legendre.leggauss(32)
_FD_STEP = 1e-6


def quadratic_normal_form(y, m: int):
    """Q_{m,n}(y) = sum of the first m squares minus the remaining ones."""
    y = np.asarray(y, dtype=float)
    sq = y * y
    return np.sum(sq[..., :m], axis=-1) - np.sum(sq[..., m:], axis=-1)


@dataclass(frozen=True)
class MorseNormalization:
    """Coordinate change tau with f = Q_{m,n} o tau on the validity box."""

    point: np.ndarray
    m: int
    n: int
    validity: Box
    rotations: tuple[np.ndarray, ...]
    signs: tuple[float, ...]
    permutation: tuple[int, ...]
    _hess_integral: object
    max_reconstruction_error: float

    def tau(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self._tau_one(x)
        return np.stack([self._tau_one(p) for p in x])

    def _tau_one(self, x) -> np.ndarray:
        n = self.n
        y = np.asarray(x, dtype=float) - self.point
        coeff = self._hess_integral(y)
        cur = y.copy()
        out = np.empty(n)
        for r in range(n):
            O = self.rotations[r]
            cur[r:] = O.T @ cur[r:]
            block = coeff[r:, r:]
            coeff[r:, r:] = O.T @ block @ O
            frr = coeff[r, r]
            if frr * self.signs[r] <= 0.0:
                raise ValidityCollapse(
                    f"pivot sign flip at step {r + 1}; point outside the validity region")
            a = coeff[r, r + 1:]
            out[r] = np.sqrt(abs(frr)) * (cur[r] + (cur[r + 1:] @ a) / frr)
            coeff[r + 1:, r + 1:] = coeff[r + 1:, r + 1:] - np.outer(a, a) / frr
        return out[list(self.permutation)]

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = self.n
        out = np.empty((n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = _FD_STEP
            out[i] = (self._tau_one(x + e) - self._tau_one(x - e)) / (2 * _FD_STEP)
        return out.T

    def reconstruct(self, x):
        """Q_{m,n}(tau(x)); equals f(x) on the validity box."""
        return quadratic_normal_form(self.tau(x), self.m)


def _make_hess_integral(hess, z0, n):
    nodes = 0.5 * (_GL32[0] + 1.0)
    weights = 0.5 * _GL32[1] * (1.0 - nodes)

    def hess_integral(y):
        pts = z0[None, :] + nodes[:, None] * y[None, :]
        H = np.asarray(hess(pts))
        out = np.tensordot(weights, H, axes=(0, 0))
        return 0.5 * (out + out.T)

    return hess_integral


def morse_normalize(f, z0, grad=None, hess=None, initial_halfwidth: float = 0.5,
                    target: float = 1e-8, min_halfwidth: float = 1e-4,
                    grid_per_axis: int = 9) -> MorseNormalization:
    """Build the normal-form coordinate change at a nondegenerate critical point.

    ``f`` takes (..., n) points; ``grad`` and ``hess`` are optional analytic
    derivatives (finite differences otherwise).  The validity box is shrunk
    geometrically until the reconstruction error on a grid_per_axis^n sample
    grid drops below ``target`` and the jacobian stays nonsingular; shrinking
    past ``min_halfwidth`` raises ValidityCollapse.
    """
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))
    n = z0.size

    def fd_grad(p):
        p = np.asarray(p, dtype=float)
        g = np.empty(p.shape)
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1e-5
            g[..., i] = (f(p + e) - f(p - e)) / 2e-5
        return g

    def fd_hess(p):
        p = np.asarray(p, dtype=float)
        gfun = grad if grad is not None else fd_grad
        h = np.empty(p.shape[:-1] + (n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1e-5
            h[..., i, :] = (np.asarray(gfun(p + e)) - np.asarray(gfun(p - e))) / 2e-5
        return 0.5 * (h + np.swapaxes(h, -1, -2))

    gfun = grad if grad is not None else fd_grad
    hfun = hess if hess is not None else fd_hess

    f0 = float(np.asarray(f(z0[None, :]))[0])
    g0 = np.asarray(gfun(z0[None, :]))[0]
    if abs(f0) > 1e-10 or np.max(np.abs(g0)) > 1e-8:
        raise ValueError(
            f"need f(z0)=0 and grad f(z0)=0; got f={f0:.3e}, |grad|={np.max(np.abs(g0)):.3e}")
    H0 = np.asarray(hfun(z0[None, :]))[0]
    H0 = 0.5 * (H0 + H0.T)
    if abs(np.linalg.det(H0)) <= 1e-9:
        raise DegenerateCritical(
            f"|det Hessian| = {abs(np.linalg.det(H0)):.3e} <= 1e-9 at the critical point")

    hess_integral = _make_hess_integral(hfun, z0, n)

    # setup pass at y = 0: rotations and pivot signs step by step
    coeff0 = hess_integral(np.zeros(n))
    rotations = []
    signs = []
    for r in range(n):
        block = coeff0[r:, r:]
        block = 0.5 * (block + block.T)
        eigvals, eigvecs = np.linalg.eigh(block)
        order = np.argsort(-np.abs(eigvals))
        eigvals = eigvals[order]
        eigvecs = eigvecs[:, order]
        for c in range(eigvecs.shape[1]):
            lead = np.argmax(np.abs(eigvecs[:, c]))
            if eigvecs[lead, c] < 0:
                eigvecs[:, c] = -eigvecs[:, c]
        O = eigvecs
        rotations.append(O)
        coeff0[r:, r:] = O.T @ block @ O
        frr = coeff0[r, r]
        signs.append(1.0 if frr > 0 else -1.0)
        a = coeff0[r, r + 1:]
        coeff0[r + 1:, r + 1:] = coeff0[r + 1:, r + 1:] - np.outer(a, a) / frr

    m = sum(1 for s in signs if s > 0)
    hess_m = int(np.sum(np.linalg.eigvalsh(H0) > 0))
    if m != hess_m:
        raise DegenerateCritical(
            f"pivot signature {m} disagrees with Hessian signature {hess_m}")
    permutation = tuple([r for r, s in enumerate(signs) if s > 0]
                        + [r for r, s in enumerate(signs) if s <= 0])

    norm = MorseNormalization(point=z0, m=m, n=n, validity=Box.make(z0 - 1, z0 + 1),
                              rotations=tuple(rotations), signs=tuple(signs),
                              permutation=permutation, _hess_integral=hess_integral,
                              max_reconstruction_error=np.nan)

    halfwidth = float(initial_halfwidth)
    while True:
        box = Box.make(z0 - halfwidth, z0 + halfwidth)
        grid = box.grid(grid_per_axis)
        try:
            err = 0.0
            singular = False
            for p in grid:
                q = quadratic_normal_form(norm._tau_one(p), m)
                err = max(err, abs(q - float(np.asarray(f(p[None, :]))[0])))
            for p in (grid[:: max(1, len(grid) // 8)]):
                if abs(np.linalg.det(norm.jacobian(p))) < 1e-12:
                    singular = True
                    break
        except ValidityCollapse:
            err = np.inf
            singular = True
        if err < target and not singular:
            return MorseNormalization(point=z0, m=m, n=n, validity=box,
                                      rotations=tuple(rotations), signs=tuple(signs),
                                      permutation=permutation,
                                      _hess_integral=hess_integral,
                                      max_reconstruction_error=err)
        halfwidth *= 0.7
        if halfwidth < min_halfwidth:
            raise ValidityCollapse(
                f"validity box collapsed below half-width {min_halfwidth}")
