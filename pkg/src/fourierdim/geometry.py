"""Hypersurface charts and curvature computations.

A :class:`Chart` is a parametrized patch ``Phi: R^d -> R^(d+1)`` (ambient
dimension 3 or 4 for the built-in catalog; curve charts in R^2 are allowed for
product constructions).  A :class:`RuledChart` is the special form

    Phi(u, v) = base(u) + sum_l v_l * ruling_l(u)

whose normal direction, for the surfaces this package studies, is constant
along each ruling.  ``unit_normal`` / ``second_fundamental_form`` /
``principal_curvatures`` / ``rank_at`` implement the shape-operator pipeline;
``check_ruled_constancy`` verifies the constant-normal structure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .box import Box
from .errors import DegenerateJacobian

__all__ = [
    "Chart",
    "RulingField",
    "RuledChart",
    "ShapeReport",
    "RuledConstancyReport",
    "unit_normal",
    "second_fundamental_form",
    "principal_curvatures",
    "rank_at",
    "shape_report",
    "check_ruled_constancy",
    "validate_chart_derivatives",
]

_FD_STEP = 1e-5
DEFAULT_RANK_TOL = 1e-7


@dataclass(frozen=True)
class Chart:
    """Parametrized patch with derivative access.

    ``evaluate`` maps (..., d) parameter points to (..., d+1) ambient points.
    ``jacobian`` returns the (..., d, d+1) array of first partials (row i is
    dPhi/dp_i) and ``hessian`` the (..., d, d, d+1) array of second partials;
    both fall back to central finite differences (step 1e-5) when absent.
    """

    evaluate: Callable
    domain: Box
    ambient_dim: int
    jacobian: Callable | None = None
    hessian: Callable | None = None
    name: str = ""

    @property
    def param_dim(self) -> int:
        return self.domain.dim

    def jacobian_at(self, p):
        p = np.asarray(p, dtype=float)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(p))
        d = self.param_dim
        out = np.empty(p.shape[:-1] + (d, self.ambient_dim))
        for i in range(d):
            e = np.zeros(d)
            e[i] = _FD_STEP
            out[..., i, :] = (self.evaluate(p + e) - self.evaluate(p - e)) / (2 * _FD_STEP)
        return out

    def hessian_at(self, p):
        """Second partials; central differences of the jacobian when absent."""
        p = np.asarray(p, dtype=float)
        if self.hessian is not None:
            return np.asarray(self.hessian(p))
        d = self.param_dim
        out = np.empty(p.shape[:-1] + (d, d, self.ambient_dim))
        for i in range(d):
            e = np.zeros(d)
            e[i] = _FD_STEP
            out[..., i, :, :] = (self.jacobian_at(p + e) - self.jacobian_at(p - e)) / (2 * _FD_STEP)
        return 0.5 * (out + np.swapaxes(out, -3, -2))


@dataclass(frozen=True)
class RulingField:
    """One ruling direction w(u) with its u-derivatives."""

    value: Callable              # (..., k) -> (..., D)
    jac: Callable                # (..., k) -> (..., k, D)
    hess: Callable               # (..., k) -> (..., k, k, D)


class RuledChart(Chart):
    """Chart of the form base(u) + sum_l v_l * ruling_l(u).

    Parameters are ordered (u_1..u_k, v_1..v_(d-k)).  The derived evaluate /
    jacobian / hessian are assembled from the base-curve and ruling
    derivatives, so they are exact whenever those are.
    """

    def __init__(self, base, base_jac, base_hess, rulings: Sequence[RulingField],
                 u_box: Box, v_box: Box, ambient_dim: int, name: str = "",
                 scaled_normal: Callable | None = None):
        self.base = base
        self.base_jac = base_jac
        self.base_hess = base_hess
        self.rulings = tuple(rulings)
        self.u_box = u_box
        self.v_box = v_box
        # closed-form (not necessarily unit) normal along the base, when known
        self.scaled_normal = scaled_normal
        domain = Box.make(tuple(u_box.lo) + tuple(v_box.lo),
                          tuple(u_box.hi) + tuple(v_box.hi))
        super().__init__(evaluate=self._evaluate, domain=domain,
                         ambient_dim=ambient_dim, jacobian=self._jacobian,
                         hessian=self._hessian, name=name)

    @property
    def u_dim(self) -> int:
        return self.u_box.dim

    @property
    def n_rulings(self) -> int:
        return len(self.rulings)

    def split(self, p):
        p = np.asarray(p, dtype=float)
        k = self.u_dim
        return p[..., :k], p[..., k:]

    def _evaluate(self, p):
        u, v = self.split(p)
        out = np.asarray(self.base(u)).copy()
        for l, r in enumerate(self.rulings):
            out = out + v[..., l, None] * np.asarray(r.value(u))
        return out

    def _jacobian(self, p):
        u, v = self.split(p)
        k, m, D = self.u_dim, self.n_rulings, self.ambient_dim
        out = np.empty(p.shape[:-1] + (k + m, D))
        ujac = np.asarray(self.base_jac(u)).copy()
        for l, r in enumerate(self.rulings):
            ujac = ujac + v[..., l, None, None] * np.asarray(r.jac(u))
            out[..., k + l, :] = np.asarray(r.value(u))
        out[..., :k, :] = ujac
        return out

    def _hessian(self, p):
        u, v = self.split(p)
        k, m, D = self.u_dim, self.n_rulings, self.ambient_dim
        d = k + m
        out = np.zeros(p.shape[:-1] + (d, d, D))
        uu = np.asarray(self.base_hess(u)).copy()
        for l, r in enumerate(self.rulings):
            uu = uu + v[..., l, None, None, None] * np.asarray(r.hess(u))
            wjac = np.asarray(r.jac(u))
            out[..., :k, k + l, :] = wjac
            out[..., k + l, :k, :] = wjac
        out[..., :k, :k, :] = uu
        return out

    def base_point(self, u):
        return np.asarray(self.base(np.asarray(u, dtype=float)))

    def normal_on_base(self, u):
        """Unit normal N(u), evaluated on the ruling through the v-box center."""
        u = np.asarray(u, dtype=float)
        vc = self.v_box.center
        if u.ndim == 1:
            p = np.concatenate([u, vc])
            return unit_normal(self, p)
        out = np.empty(u.shape[:-1] + (self.ambient_dim,))
        for idx in np.ndindex(u.shape[:-1]):
            out[idx] = unit_normal(self, np.concatenate([u[idx], vc]))
        return out

    def normal_jac_on_base(self, u, step: float = _FD_STEP):
        """dN/du_j by central differences, shape (k, D)."""
        u = np.asarray(u, dtype=float)
        k = self.u_dim
        out = np.empty((k, self.ambient_dim))
        for j in range(k):
            e = np.zeros(k)
            e[j] = step
            out[j] = (self.normal_on_base(u + e) - self.normal_on_base(u - e)) / (2 * step)
        return out


@dataclass(frozen=True)
class ShapeReport:
    point: np.ndarray
    unit_normal: np.ndarray
    second_fundamental_form: np.ndarray
    principal_curvatures: np.ndarray
    rank: int


@dataclass(frozen=True)
class RuledConstancyReport:
    ok: bool
    max_normal_deviation: float
    max_ruling_pairing: float
    normal_tol: float
    pairing_tol: float

    def __bool__(self) -> bool:
        return self.ok


def unit_normal(chart: Chart, p) -> np.ndarray:
    """Unit normal at parameter point p, oriented last-component-nonnegative.

    The normal spans the null space of the jacobian; if the jacobian drops
    rank (immersion failure) DegenerateJacobian is raised.  When the last
    component vanishes the sign is fixed by the first nonzero component.
    """
    p = np.asarray(p, dtype=float)
    J = np.asarray(chart.jacobian_at(p))
    if J.ndim != 2:
        raise ValueError("unit_normal expects a single parameter point")
    d, D = J.shape
    if D != d + 1:
        raise ValueError("normal direction needs ambient_dim == param_dim + 1")
    _, s, vh = np.linalg.svd(J)
    if s[-1] <= 1e-10 * s[0]:
        raise DegenerateJacobian(f"jacobian rank < {d} at {p.tolist()}")
    n = vh[-1]
    n = n / np.linalg.norm(n)
    if abs(n[-1]) > 1e-13:
        if n[-1] < 0:
            n = -n
    else:
        nz = np.flatnonzero(np.abs(n) > 1e-13)
        if nz.size and n[nz[0]] < 0:
            n = -n
    return n


def second_fundamental_form(chart: Chart, p) -> np.ndarray:
    """Matrix of second partials contracted with the unit normal."""
    N = unit_normal(chart, p)
    H = np.asarray(chart.hessian_at(np.asarray(p, dtype=float)))
    sff = H @ N
    return 0.5 * (sff + sff.T)


def principal_curvatures(chart: Chart, p) -> np.ndarray:
    """Eigenvalues of the shape operator, sorted ascending.

    Solves the symmetric-definite pencil II v = lam I v, with I the first
    fundamental form, so the result is always real.
    """
    p = np.asarray(p, dtype=float)
    J = np.asarray(chart.jacobian_at(p))
    first = J @ J.T
    second = second_fundamental_form(chart, p)
    return np.sort(scipy.linalg.eigh(second, first, eigvals_only=True))


def rank_at(chart: Chart, p, rank_tol: float = DEFAULT_RANK_TOL) -> int:
    """Number of principal curvatures with |value| > rank_tol."""
    return int(np.sum(np.abs(principal_curvatures(chart, p)) > rank_tol))


def shape_report(chart: Chart, p, rank_tol: float = DEFAULT_RANK_TOL) -> ShapeReport:
    p = np.asarray(p, dtype=float)
    curv = principal_curvatures(chart, p)
    return ShapeReport(
        point=p,
        unit_normal=unit_normal(chart, p),
        second_fundamental_form=second_fundamental_form(chart, p),
        principal_curvatures=curv,
        rank=int(np.sum(np.abs(curv) > rank_tol)),
    )


def check_ruled_constancy(chart: RuledChart, u_samples: int = 9, v_samples: int = 4,
                          normal_tol: float = 1e-8,
                          pairing_tol: float = 1e-6) -> RuledConstancyReport:
    """Verify that unit normals are constant along rulings.

    Checks max |N(u,v) - N(u,v')| over a parameter grid and the pairing
    |<w_l(u), dN/du_j(u)>| that must vanish for constant-rank structure.
    """
    ugrid = chart.u_box.grid(u_samples)
    vgrid = chart.v_box.grid(v_samples)
    max_dev = 0.0
    for u in ugrid:
        normals = []
        for v in vgrid:
            normals.append(unit_normal(chart, np.concatenate([u, v])))
        normals = np.asarray(normals)
        dev = np.max(np.linalg.norm(normals - normals[0], axis=-1))
        max_dev = max(max_dev, float(dev))

    max_pair = 0.0
    for u in ugrid:
        dN = chart.normal_jac_on_base(u)
        for r in chart.rulings:
            w = np.asarray(r.value(u))
            max_pair = max(max_pair, float(np.max(np.abs(dN @ w))))

    return RuledConstancyReport(
        ok=bool(max_dev < normal_tol and max_pair < pairing_tol),
        max_normal_deviation=max_dev,
        max_ruling_pairing=max_pair,
        normal_tol=normal_tol,
        pairing_tol=pairing_tol,
    )


def validate_chart_derivatives(chart: Chart, points, step: float = _FD_STEP):
    """Max deviation of analytic jacobian/hessian from central differences."""
    pts = np.asarray(points, dtype=float)
    d = chart.param_dim
    jac_dev = 0.0
    hess_dev = 0.0
    for p in pts:
        J = np.asarray(chart.jacobian_at(p))
        H = np.asarray(chart.hessian_at(p))
        for i in range(d):
            e = np.zeros(d)
            e[i] = step
            fd_row = (chart.evaluate(p + e) - chart.evaluate(p - e)) / (2 * step)
            jac_dev = max(jac_dev, float(np.max(np.abs(fd_row - J[i]))))
            fd_hrow = (chart.jacobian_at(p + e) - chart.jacobian_at(p - e)) / (2 * step)
            hess_dev = max(hess_dev, float(np.max(np.abs(fd_hrow - H[i]))))
    return jac_dev, hess_dev
