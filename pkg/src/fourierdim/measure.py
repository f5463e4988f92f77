"""Surface measures, push-forwards, averaging, and Fourier transforms.

A :class:`SurfaceMeasure` is the push-forward of a smooth compactly supported
density on parameter space through a chart; its transform is

    mu_hat(xi) = integral exp(-2*pi*i * Phi(p).xi) * w(p) dp,

evaluated through the oscillatory quadrature module.  For ruled charts with
tensor-product densities the ruling integrals factor exactly:

    mu_hat(xi) = integral_u exp(-2*pi*i * base(u).xi)
                 * prod_l vhat_l(xi . ruling_l(u)) * w_u(u) du,

where vhat_l is the 1-D transform of the ruling density factor.  The vhat_l
are tabulated once per frequency bucket (FFT of the sampled bump, cubic
Hermite interpolation in between), which keeps high-frequency transforms of
ruled measures at 1-D cost.  This is what makes the averaged-measure decay
scans tractable at rho = 2^12.

The averaging construction re-anchors the surface with the affine maps T_s
(fix the first d coordinates, rewrite the last as (x - base(s)) . N(s) for the
unit normal N(s)) and averages the push-forwards with a bump weight in s; its
transform along the last axis reduces to the base-dimensional integral

    nu_hat(rho e_D) = integral exp(2*pi*i*rho * base(s).N(s))
                      * mu_hat(rho N(s)) * psi(s) ds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from itertools import product as iter_product

import numba
import numpy as np
import scipy.fft

from .box import Box
from .bumps import Bump1D, TensorBump
from .catalog import catalog_entry
from .errors import QuadratureNotConverged
from .geometry import Chart, RuledChart, RulingField, check_ruled_constancy
from .oscillatory import OscillatorySpec, QuadratureResult, integrate

__all__ = [
    "SurfaceMeasure",
    "PointMass",
    "ProductMeasure",
    "PushforwardMap",
    "AveragedMeasure",
    "default_measure",
    "default_averaging_bump",
    "fourier",
    "fourier_full",
    "fourier_batch",
    "pushforward_point",
    "pushforward_measure",
    "averaged_fourier",
    "averaged_fourier_full",
    "product_measure",
    "cutoff",
    "measure_to_json",
    "measure_from_json",
]


# ---------------------------------------------------------------------------
# measures
# ---------------------------------------------------------------------------

class SurfaceMeasure:
    """Chart push-forward of a smooth nonnegative density on parameter space."""

    def __init__(self, chart: Chart, density, name: str = ""):
        self.chart = chart
        self.density = density
        self.name = name or chart.name
        self._tables: dict = {}
        self._grids: dict = {}

    @cached_property
    def mass(self) -> float:
        if isinstance(self.density, TensorBump):
            return self.density.mass()
        return _density_mass(self.chart.domain, self.density)

    @property
    def ambient_dim(self) -> int:
        return self.chart.ambient_dim

    def density_support(self) -> Box:
        if isinstance(self.density, TensorBump):
            return Box.make(self.density.support_lo, self.density.support_hi)
        return self.chart.domain

    def __repr__(self):
        return f"SurfaceMeasure({self.name}, mass={self.mass:.6g})"


@dataclass(frozen=True)
class PointMass:
    """Unit-style atom at a fixed ambient point (a product-factor control)."""

    point: tuple[float, ...]
    weight: float = 1.0

    @property
    def ambient_dim(self) -> int:
        return len(self.point)

    @property
    def mass(self) -> float:
        return self.weight


class ProductMeasure:
    """Cartesian product of two measures; transform factorizes exactly."""

    def __init__(self, first, second):
        self.first = first
        self.second = second
        if self.ambient_dim > 4:
            raise ValueError(
                f"ambient_dim {self.ambient_dim} exceeds the supported maximum of 4")

    @property
    def ambient_dim(self) -> int:
        return self.first.ambient_dim + self.second.ambient_dim

    @property
    def mass(self) -> float:
        return self.first.mass * self.second.mass

    def split(self, xi):
        xi = np.asarray(xi, dtype=float)
        n1 = self.first.ambient_dim
        return xi[:n1], xi[n1:]


def default_measure(chart: Chart, name: str = "") -> SurfaceMeasure:
    """Measure with per-axis bumps: flat on the half-box, gone outside 3/4 box."""
    factors = []
    for lo, hi in zip(chart.domain.lo, chart.domain.hi):
        c = 0.5 * (lo + hi)
        h = 0.5 * (hi - lo)
        factors.append(Bump1D(center=c, inner=0.5 * h, outer=0.75 * h))
    return SurfaceMeasure(chart, TensorBump(tuple(factors)), name=name)


def default_averaging_bump(chart: RuledChart) -> TensorBump:
    """Averaging weight over the base box: 1 on it, supported on its double."""
    factors = []
    for lo, hi in zip(chart.u_box.lo, chart.u_box.hi):
        c = 0.5 * (lo + hi)
        h = 0.5 * (hi - lo)
        factors.append(Bump1D(center=c, inner=h, outer=2.0 * h))
    return TensorBump(tuple(factors))


def _density_mass(domain: Box, density) -> float:
    nodes, weights = np.polynomial.legendre.leggauss(16)
    axes = []
    for lo, hi in zip(domain.lo, domain.hi):
        panels = 32
        h = (hi - lo) / panels
        centers = lo + h * (np.arange(panels) + 0.5)
        x = (centers[:, None] + 0.5 * h * nodes[None, :]).ravel()
        w = np.tile(0.5 * h * weights, panels)
        axes.append((x, w))
    mesh = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    wmesh = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    wtot = np.prod(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1)
    return float(np.sum(np.asarray(density(pts)) * wtot))


# ---------------------------------------------------------------------------
# tabulated 1-D bump transforms for ruling factors
# ---------------------------------------------------------------------------

class _BumpTransformTable:
    """vhat(theta) = integral w(v) exp(-2*pi*i*theta*v) dv on |theta| <= bucket.

    The fast oscillation exp(-2*pi*i*theta*center) is factored out; the
    demodulated transform is sampled by FFT on a uniform theta grid and
    interpolated with cubic Hermite polynomials (value + derivative tables),
    giving ~1e-9 absolute accuracy relative to the factor mass.
    """

    def __init__(self, bump: Bump1D, bucket: float):
        self.bump = bump
        self.bucket = float(bucket)
        r = bump.outer               # support half-width around the center
        width = bump.outer - bump.inner
        # interpolation step from the cubic Hermite error bound (2 pi r)^4 h^4 / 384
        self.dtheta = (384.0 * 1e-9) ** 0.25 / (2.0 * math.pi * r)
        # anti-aliasing margin: the transform must be negligible past bucket+margin
        margin = max(2000.0, 3000.0 * (0.125 / width))
        limit = self.bucket + margin
        samples = int(math.ceil(2.0 * limit / self.dtheta))
        samples = scipy.fft.next_fast_len(samples)
        self.n_grid = int(math.ceil(self.bucket / self.dtheta))
        h = 1.0 / (samples * self.dtheta)
        m = np.arange(samples)
        v = bump.center + (m - samples / 2) * h
        w = bump(v)
        j = np.concatenate([np.arange(-self.n_grid, 0), np.arange(0, self.n_grid + 1)])
        order = np.argsort(j)
        j = j[order]
        sign = np.where(j % 2 == 0, 1.0, -1.0)
        F = scipy.fft.fft(w.astype(complex))
        Fd = scipy.fft.fft((w * (-2j * math.pi) * (v - bump.center)).astype(complex))
        self.theta0 = -self.n_grid * self.dtheta
        self.values = h * sign * F[j % samples]
        self.derivs = h * sign * Fd[j % samples]
        # per-interval cubic coefficients: evaluation is four gathers + Horner
        y0 = self.values[:-1]
        y1 = self.values[1:]
        d0 = self.derivs[:-1] * self.dtheta
        d1 = self.derivs[1:] * self.dtheta
        self.coef = np.stack([y0, d0,
                              3.0 * (y1 - y0) - 2.0 * d0 - d1,
                              -2.0 * (y1 - y0) + d0 + d1])
        self._c0, self._c1, self._c2, self._c3 = self.coef

    def demodulated(self, theta):
        """Transform with the carrier exp(-2*pi*i*theta*center) divided out."""
        theta = np.asarray(theta, dtype=float)
        pos = (theta - self.theta0) / self.dtheta
        idx = np.clip(pos.astype(int), 0, self._c0.size - 1)
        t = pos - idx
        out = self._c3[idx]
        out = out * t
        out += self._c2[idx]
        out *= t
        out += self._c1[idx]
        out *= t
        out += self._c0[idx]
        return out

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.demodulated(theta) * np.exp((-2j * math.pi * self.bump.center) * theta)


def _get_table(measure: SurfaceMeasure, ruling_index: int, bump: Bump1D,
               needed: float) -> _BumpTransformTable:
    bucket = 64.0
    while bucket < needed:
        bucket *= 2.0
    key = (ruling_index, bucket)
    table = measure._tables.get(key)
    if table is None:
        table = _BumpTransformTable(bump, bucket)
        measure._tables[key] = table
    return table


# ---------------------------------------------------------------------------
# Fourier transforms
# ---------------------------------------------------------------------------

def fourier_full(measure, xi, tol: float = 1e-9, deriv_bound=None) -> QuadratureResult:
    """Transform value with its convergence certificate."""
    xi = np.asarray(xi, dtype=float)
    if isinstance(measure, PointMass):
        val = measure.weight * np.exp(-2j * math.pi * float(np.dot(measure.point, xi)))
        return QuadratureResult(value=complex(val), error_estimate=0.0,
                                panels_used=0, converged=True)
    if isinstance(measure, ProductMeasure):
        return _fourier_product(measure, xi, tol)
    if xi.shape != (measure.ambient_dim,):
        raise ValueError(f"xi must have shape ({measure.ambient_dim},)")
    rho = float(np.linalg.norm(xi))
    if rho == 0.0:
        return QuadratureResult(value=complex(measure.mass), error_estimate=0.0,
                                panels_used=0, converged=True)
    if isinstance(measure.chart, RuledChart) and isinstance(measure.density, TensorBump):
        return _fourier_ruled(measure, xi, tol, deriv_bound=deriv_bound)
    if measure.chart.param_dim <= 2:
        vals, errs, pans = _plain_batch(measure, xi[None, :], tol)
        return QuadratureResult(value=complex(vals[0]), error_estimate=float(errs[0]),
                                panels_used=int(pans[0]), converged=True)
    return _fourier_generic(measure, xi, tol)


def fourier(measure, xi, tol: float = 1e-9) -> complex:
    """mu_hat(xi) = integral exp(-2*pi*i x.xi) dmu(x)."""
    return fourier_full(measure, xi, tol).value


def _fourier_generic(measure: SurfaceMeasure, xi, tol) -> QuadratureResult:
    chart = measure.chart
    rho = float(np.linalg.norm(xi))
    eta = np.asarray(xi, dtype=float) / rho

    def phase(p):
        return np.asarray(chart.evaluate(p)) @ eta

    grad = None
    if chart.jacobian is not None:
        def grad(p):
            return np.asarray(chart.jacobian_at(p)) @ eta

    spec = OscillatorySpec(phase=phase, amplitude=measure.density,
                           domain=chart.domain, frequency=2.0 * math.pi * rho,
                           sign=-1, gradient=grad, mass_hint=measure.mass)
    return integrate(spec, tol)


def _ruled_parts(measure: SurfaceMeasure):
    chart: RuledChart = measure.chart
    k = chart.u_dim
    return chart, k, measure.density.factors[:k], measure.density.factors[k:]


def _ruling_deriv_bound(measure: SurfaceMeasure, eta=None) -> np.ndarray:
    """Per-axis bound on |d(Phi . eta)/du| over the density support in v.

    The derivative is affine in v, so the maximum over the support box sits at
    its corners.  With eta=None the row norms bound every direction at once.
    """
    chart, k, _, v_factors = _ruled_parts(measure)
    probe = chart.u_box.grid(65 if k == 1 else 17)
    corners = list(iter_product(*[f.support for f in v_factors]))
    base_jac = np.asarray(chart.base_jac(probe))        # (N, k, D)
    ruling_jacs = [np.asarray(r.jac(probe)) for r in chart.rulings]
    bounds = np.zeros(k)
    for corner in corners:
        J = base_jac.copy()
        for l, vl in enumerate(corner):
            J = J + vl * ruling_jacs[l]
        if eta is None:
            bounds = np.maximum(bounds, np.max(np.linalg.norm(J, axis=-1), axis=0))
        else:
            bounds = np.maximum(bounds, np.max(np.abs(J @ eta), axis=0))
    return bounds


def _grid_data(measure: SurfaceMeasure, pts: np.ndarray):
    """Chart values on a 1-D quadrature grid, cached by grid signature.

    The cached arrays are pure functions of the grid, so results do not
    depend on call history.
    """
    chart, k, u_factors, v_factors = _ruled_parts(measure)
    key = (pts.shape[0], float(pts[0, 0]), float(pts[-1, 0]))
    data = measure._grids.get(key)
    if data is None:
        rulings = [np.asarray(r.value(pts)) for r in chart.rulings]
        center = np.asarray(chart.base(pts)).copy()
        for l, f in enumerate(v_factors):
            center += f.center * rulings[l]
        udens = np.ones(pts.shape[0])
        for j, f in enumerate(u_factors):
            udens = udens * f(pts[:, j])
        data = (center, rulings, udens)
        measure._grids[key] = data
    return data


def _fourier_ruled(measure: SurfaceMeasure, xi, tol,
                   deriv_bound=None) -> QuadratureResult:
    """Exact ruling factorization; cost is that of a base-dimensional integral.

    The oscillatory phase is taken at the v-density centers, so the ruling
    factors enter through their demodulated transforms and the integrand needs
    a single complex exponential per node.
    """
    chart, k, u_factors, v_factors = _ruled_parts(measure)
    xi = np.asarray(xi, dtype=float)
    rho = float(np.linalg.norm(xi))
    eta = xi / rho

    probe = chart.u_box.grid(65 if k == 1 else 17)
    tables = []
    for l, r in enumerate(chart.rulings):
        th = np.asarray(r.value(probe)) @ xi
        needed = 1.05 * float(np.max(np.abs(th))) + 1.0
        tables.append(_get_table(measure, l, v_factors[l], needed))

    def amplitude(u):
        u = np.asarray(u, dtype=float)
        if k == 1 and u.ndim == 2:
            _, rulings, udens = _grid_data(measure, u)
            out = udens.astype(complex)
            for l in range(len(tables)):
                out = out * tables[l].demodulated(rulings[l] @ xi)
            return out
        out = np.ones(u.shape[:-1], dtype=complex)
        for j, f in enumerate(u_factors):
            out = out * f(u[..., j])
        for l, r in enumerate(chart.rulings):
            out = out * tables[l].demodulated(np.asarray(r.value(u)) @ xi)
        return out

    def phase(u):
        u = np.asarray(u, dtype=float)
        if k == 1 and u.ndim == 2:
            center, _, _ = _grid_data(measure, u)
            return center @ eta
        center = np.asarray(chart.base(u)).copy()
        for l, r in enumerate(chart.rulings):
            center = center + v_factors[l].center * np.asarray(r.value(u))
        return center @ eta

    if deriv_bound is None:
        deriv_bound = 1.05 * _ruling_deriv_bound(measure, eta)
    spec = OscillatorySpec(phase=phase, amplitude=amplitude, domain=chart.u_box,
                           frequency=2.0 * math.pi * rho, sign=-1,
                           deriv_bound=deriv_bound, mass_hint=measure.mass)
    return integrate(spec, tol)


def _fourier_product(measure: ProductMeasure, xi, tol) -> QuadratureResult:
    xi1, xi2 = measure.split(xi)
    chart_backed = (isinstance(measure.first, SurfaceMeasure)
                    and isinstance(measure.second, SurfaceMeasure))
    if not chart_backed:
        r1 = fourier_full(measure.first, xi1, tol)
        r2 = fourier_full(measure.second, xi2, tol)
        return QuadratureResult(value=r1.value * r2.value,
                                error_estimate=abs(r1.value) * r2.error_estimate
                                + abs(r2.value) * r1.error_estimate,
                                panels_used=r1.panels_used + r2.panels_used,
                                converged=r1.converged and r2.converged)

    m1, m2 = measure.first, measure.second
    d1 = m1.chart.param_dim
    d2 = m2.chart.param_dim
    if d1 + d2 > 3:
        raise ValueError("joint quadrature supports total parameter dimension <= 3")
    rho = float(np.linalg.norm(np.asarray(xi, dtype=float)))
    if rho == 0.0:
        return QuadratureResult(value=complex(measure.mass), error_estimate=0.0,
                                panels_used=0, converged=True)

    def phase(p):
        p = np.asarray(p, dtype=float)
        return (np.asarray(m1.chart.evaluate(p[..., :d1])) @ xi1
                + np.asarray(m2.chart.evaluate(p[..., d1:])) @ xi2) / rho

    def amplitude(p):
        p = np.asarray(p, dtype=float)
        return np.asarray(m1.density(p[..., :d1])) * np.asarray(m2.density(p[..., d1:]))

    grid1 = m1.chart.domain.grid(33 if d1 == 1 else 9)
    grid2 = m2.chart.domain.grid(33 if d2 == 1 else 9)
    b1 = np.max(np.abs(np.asarray(m1.chart.jacobian_at(grid1)) @ xi1), axis=0)
    b2 = np.max(np.abs(np.asarray(m2.chart.jacobian_at(grid2)) @ xi2), axis=0)
    bounds = np.concatenate([b1, b2]) / rho

    domain = Box.make(tuple(m1.chart.domain.lo) + tuple(m2.chart.domain.lo),
                      tuple(m1.chart.domain.hi) + tuple(m2.chart.domain.hi))
    spec = OscillatorySpec(phase=phase, amplitude=amplitude, domain=domain,
                           frequency=2.0 * math.pi * rho, sign=-1,
                           deriv_bound=1.05 * bounds, mass_hint=measure.mass)
    return integrate(spec, tol)


def product_measure(first, second) -> ProductMeasure:
    """Cartesian product measure in the concatenated ambient space (<= R^4)."""
    return ProductMeasure(first, second)


def cutoff(measure: SurfaceMeasure, f) -> SurfaceMeasure:
    """Multiply the measure by a smooth ambient function: density w(p)*f(Phi(p))."""
    chart = measure.chart
    old = measure.density

    def density(p):
        p = np.asarray(p, dtype=float)
        return np.asarray(old(p)) * np.asarray(f(chart.evaluate(p)))

    return SurfaceMeasure(chart, density, name=f"{measure.name}*cutoff")


# ---------------------------------------------------------------------------
# push-forward re-anchoring maps
# ---------------------------------------------------------------------------

class PushforwardMap:
    """Affine re-anchoring T_s: keep the first d coordinates, rewrite the last
    as (x - base(s)) . N(s) with the unit normal N(s).

    At s = base-box center the normal is the last coordinate axis and T_s is
    the identity on the surface.
    """

    def __init__(self, chart: RuledChart, shift):
        self.chart = chart
        self.shift = np.atleast_1d(np.asarray(shift, dtype=float))
        if self.shift.shape != (chart.u_dim,):
            raise ValueError(f"shift must have shape ({chart.u_dim},)")
        self.normal = chart.normal_on_base(self.shift)
        self.base_at_shift = chart.base_point(self.shift)

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        out = x.copy()
        out[..., -1] = (x - self.base_at_shift) @ self.normal
        return out

    def image_chart(self) -> RuledChart:
        """Ruled chart of the image surface: last components rewritten against N(s)."""
        chart = self.chart
        D = chart.ambient_dim
        N = self.normal
        tilt = N.copy()
        tilt[-1] -= 1.0                       # N(s) - e_D
        offset = -float(self.base_at_shift @ N)

        def lift_value(fn, constant=0.0):
            def call(u):
                val = np.asarray(fn(u)).copy()
                val[..., -1] += val @ tilt + constant
                return val
            return call

        def lift_rows(fn):
            def call(u):
                val = np.asarray(fn(u)).copy()
                val[..., -1] += val @ tilt
                return val
            return call

        rulings = [RulingField(value=lift_value(r.value), jac=lift_rows(r.jac),
                               hess=lift_rows(r.hess)) for r in chart.rulings]
        return RuledChart(base=lift_value(chart.base, constant=offset),
                          base_jac=lift_rows(chart.base_jac),
                          base_hess=lift_rows(chart.base_hess),
                          rulings=rulings, u_box=chart.u_box, v_box=chart.v_box,
                          ambient_dim=D, name=f"{chart.name}|shift{self.shift.tolist()}")


def pushforward_point(pmap: PushforwardMap, p) -> np.ndarray:
    """Image of the surface point with parameters p under the re-anchoring map."""
    return pmap.apply(pmap.chart.evaluate(np.asarray(p, dtype=float)))


def pushforward_measure(measure: SurfaceMeasure, shift) -> SurfaceMeasure:
    """Push the measure through T_s; same parameters and density on the image chart."""
    if not isinstance(measure.chart, RuledChart):
        raise TypeError("push-forward re-anchoring requires a ruled chart")
    pmap = PushforwardMap(measure.chart, shift)
    return SurfaceMeasure(pmap.image_chart(), measure.density,
                          name=f"{measure.name}|shift")


# ---------------------------------------------------------------------------
# averaged measures
# ---------------------------------------------------------------------------

class AveragedMeasure:
    """Average of the re-anchored push-forwards T_s# mu with weight psi(s).

    Only defined through its functionals; the transform along the last axis is
    computed by the reduced base-dimensional integral (see module docstring).
    Construction validates the constant-normal structure, the orientation of
    the normal field over the weight support, and that the re-anchoring phase
    has a unique stationary point there.
    """

    def __init__(self, base: SurfaceMeasure, weight: TensorBump | None = None,
                 validate: bool = True):
        if not isinstance(base.chart, RuledChart):
            raise TypeError("averaging requires a ruled chart")
        self.base = base
        self.chart: RuledChart = base.chart
        self.weight = weight or default_averaging_bump(self.chart)
        if self.weight.dim != self.chart.u_dim:
            raise ValueError("averaging weight dimension must match the base box")
        self.weight_domain = Box.make(self.weight.support_lo, self.weight.support_hi)
        if validate:
            self._validate()

    @cached_property
    def weight_mass(self) -> float:
        return self.weight.mass()

    @cached_property
    def mass(self) -> float:
        """nu_hat(0) = mass(mu) * integral(psi)."""
        return self.base.mass * self.weight_mass

    def _validate(self):
        report = check_ruled_constancy(self.chart)
        if not report.ok:
            raise ValueError(f"chart fails ruled-constancy check: {report}")
        if self.chart.u_dim != 1:
            return  # uniqueness probe below is for one-dimensional bases
        grid = np.linspace(self.weight_domain.lo[0], self.weight_domain.hi[0], 513)
        normals = np.stack([self.chart.normal_on_base(np.array([s])) for s in grid])
        if np.min(normals[:, -1]) < 0.5:
            raise ValueError("normal field tilts too far from the anchor axis")
        dN = (normals[2:] - normals[:-2]) / (grid[2:] - grid[:-2])[:, None]
        bases = np.stack([self.chart.base_point(np.array([s])) for s in grid[1:-1]])
        support = self.base.density_support()
        for p in list(support.grid(3)):
            x = np.asarray(self.chart.evaluate(p))
            dphi = np.einsum("jd,jd->j", x[None, :] - bases, dN)
            signs = np.sign(dphi)
            signs = signs[signs != 0]          # grid points may hit roots exactly
            flips = int(np.sum(np.diff(signs) != 0))
            if flips != 1:
                raise ValueError(
                    f"re-anchoring phase has {flips} stationary points over the "
                    f"weight support at parameters {p.tolist()}; need exactly one")

    def shift_map(self, s) -> PushforwardMap:
        return PushforwardMap(self.chart, s)




def fourier_batch(measure, xis, tol: float = 1e-8) -> np.ndarray:
    """Transforms at a batch of frequencies, shape (S, D) -> (S,) complex.

    Same quadrature semantics as ``fourier_full`` on each row (gradient-sized
    panels, order-16 composite Gauss-Legendre, accepted on panel doubling),
    but rows share node grids so chart data is evaluated once per grid and the
    integrand reduces to matrix products plus one complex exponential per
    node.  Rows are grouped into panel-count buckets from their tight
    per-direction derivative bounds.  Product measures factorize into batched
    factor transforms (the factorization itself is verified separately).
    """
    xis = np.asarray(xis, dtype=float)
    if np.any(np.linalg.norm(xis, axis=1) == 0.0):
        return np.array([fourier_full(measure, xi, tol).value for xi in xis])
    if isinstance(measure, PointMass):
        return measure.weight * np.exp(-2j * math.pi * (xis @ np.asarray(measure.point)))
    if isinstance(measure, ProductMeasure):
        n1 = measure.first.ambient_dim
        return (fourier_batch(measure.first, xis[:, :n1], tol)
                * fourier_batch(measure.second, xis[:, n1:], tol))
    if isinstance(measure, SurfaceMeasure):
        if (isinstance(measure.chart, RuledChart)
                and isinstance(measure.density, TensorBump)
                and measure.chart.u_dim == 1):
            return _ruled_batch(measure, xis, tol)
        if measure.chart.param_dim <= 2:
            return _plain_batch(measure, xis, tol)[0]
    return np.array([fourier_full(measure, xi, tol).value for xi in xis])


@numba.njit(cache=True)
def _batch_kernel_1(xis, center, r0, wdens, th00, dth0, n0, coef0, out):
    """Fused integrand sum for one ruling factor; sequential j, deterministic."""
    S, D = xis.shape
    N = center.shape[0]
    for i in range(S):
        acc = 0.0 + 0.0j
        for j in range(N):
            ph = 0.0
            th = 0.0
            for d in range(D):
                ph += center[j, d] * xis[i, d]
                th += r0[j, d] * xis[i, d]
            ph *= -2.0 * math.pi
            pos = (th - th00) / dth0
            kk = int(pos)
            if kk < 0:
                kk = 0
            elif kk > n0 - 1:
                kk = n0 - 1
            t = pos - kk
            cub = ((coef0[3, kk] * t + coef0[2, kk]) * t + coef0[1, kk]) * t + coef0[0, kk]
            acc += (wdens[j] * complex(math.cos(ph), math.sin(ph))) * cub
        out[i] = acc


@numba.njit(cache=True)
def _batch_kernel_2(xis, center, r0, r1, wdens, th00, dth0, n0, coef0,
                    th01, dth1, n1, coef1, out):
    """Fused integrand sum for two ruling factors; sequential j, deterministic."""
    S, D = xis.shape
    N = center.shape[0]
    for i in range(S):
        acc = 0.0 + 0.0j
        for j in range(N):
            ph = 0.0
            th_a = 0.0
            th_b = 0.0
            for d in range(D):
                ph += center[j, d] * xis[i, d]
                th_a += r0[j, d] * xis[i, d]
                th_b += r1[j, d] * xis[i, d]
            ph *= -2.0 * math.pi
            pos = (th_a - th00) / dth0
            kk = int(pos)
            if kk < 0:
                kk = 0
            elif kk > n0 - 1:
                kk = n0 - 1
            t = pos - kk
            cub_a = ((coef0[3, kk] * t + coef0[2, kk]) * t + coef0[1, kk]) * t + coef0[0, kk]
            pos = (th_b - th01) / dth1
            kk = int(pos)
            if kk < 0:
                kk = 0
            elif kk > n1 - 1:
                kk = n1 - 1
            t = pos - kk
            cub_b = ((coef1[3, kk] * t + coef1[2, kk]) * t + coef1[1, kk]) * t + coef1[0, kk]
            acc += (wdens[j] * complex(math.cos(ph), math.sin(ph))) * (cub_a * cub_b)
        out[i] = acc


@numba.njit(cache=True)
def _plain_kernel(xis, phi, wdens, out):
    """Accumulate sum_j wdens[j] * exp(-2*pi*i * phi[j].xis[i]) into out."""
    S, D = xis.shape
    N = phi.shape[0]
    for i in range(S):
        acc = 0.0 + 0.0j
        for j in range(N):
            ph = 0.0
            for d in range(D):
                ph += phi[j, d] * xis[i, d]
            ph *= -2.0 * math.pi
            acc += wdens[j] * complex(math.cos(ph), math.sin(ph))
        out[i] += acc


def _plain_grid_chunks(measure: SurfaceMeasure, panels):
    """Tensor-grid chunks (ambient points, density*weights) for a plain chart."""
    chart = measure.chart
    d = chart.param_dim
    rules = [_axis_rule_cached(chart.domain.lo[i], chart.domain.hi[i], int(panels[i]))
             for i in range(d)]
    if d == 1:
        x, w = rules[0]
        for i0 in range(0, x.size, _BATCH_POINTS):
            pts = x[i0:i0 + _BATCH_POINTS, None]
            phi = np.ascontiguousarray(np.asarray(chart.evaluate(pts), dtype=float))
            wd = np.ascontiguousarray(np.asarray(measure.density(pts), dtype=float)
                                      * w[i0:i0 + _BATCH_POINTS])
            yield phi, wd
        return
    x0, w0 = rules[0]
    x1, w1 = rules[1]
    rows = max(1, _BATCH_POINTS // x1.size)
    for i0 in range(0, x0.size, rows):
        xs = x0[i0:i0 + rows]
        ws = w0[i0:i0 + rows]
        pts = np.empty((xs.size, x1.size, 2))
        pts[:, :, 0] = xs[:, None]
        pts[:, :, 1] = x1[None, :]
        flat = pts.reshape(-1, 2)
        phi = np.ascontiguousarray(np.asarray(chart.evaluate(flat), dtype=float))
        wd = np.ascontiguousarray(
            (np.asarray(measure.density(pts), dtype=float)
             * (ws[:, None] * w1[None, :])).ravel())
        yield phi, wd


def _plain_batch(measure: SurfaceMeasure, xis: np.ndarray, tol: float):
    """Batched transforms for non-ruled charts (param_dim <= 2).

    Identical quadrature semantics to ``integrate`` (gradient-sized panels,
    order-16 composite Gauss-Legendre, accepted when a panel doubling moves
    the value by less than max(tol*|value|, 1e-13*mass), at most six
    doublings), evaluated in direction buckets over shared grids.
    """
    chart = measure.chart
    d = chart.param_dim
    xis = np.asarray(xis, dtype=float)
    rhos = np.linalg.norm(xis, axis=1)
    probe = chart.domain.grid(33 if d <= 2 else 9)
    J = np.asarray(chart.jacobian_at(probe))
    proj = np.abs(np.einsum("pkd,sd->spk", J, xis / rhos[:, None]))
    bounds = 1.05 * proj.max(axis=1)
    lam = 2.0 * math.pi * rhos
    lengths = chart.domain.lengths
    panels = np.maximum(4, np.ceil(
        3.0 * lam[:, None] * lengths[None, :] * bounds / 16.0).astype(int))
    quant = np.power(2.0, np.ceil(np.log2(panels) / 0.25) * 0.25)
    quant = np.maximum(4, np.ceil(quant).astype(int))
    floor = 1e-13 * measure.mass

    values = np.empty(len(xis), dtype=complex)
    errors = np.empty(len(xis))
    panels_used = np.empty(len(xis), dtype=int)

    groups: dict = {}
    for i, key in enumerate(map(tuple, quant)):
        groups.setdefault(key, []).append(i)
    for key, idx in sorted(groups.items()):
        sel = np.array(idx)
        xsel = np.ascontiguousarray(xis[sel])

        def level_values(mult, rows):
            pan = [k * mult for k in key]
            val = np.zeros(rows.size, dtype=complex)
            for phi, wd in _plain_grid_chunks(measure, pan):
                _plain_kernel(np.ascontiguousarray(xsel[rows]), phi, wd, val)
            return val

        all_rows = np.arange(sel.size)
        prev = level_values(1, all_rows)
        cur = prev.copy()
        err = np.full(sel.size, np.inf)
        done = np.zeros(sel.size, dtype=bool)
        mult = 1
        for _ in range(6):
            mult *= 2
            active = np.flatnonzero(~done)
            fresh = level_values(mult, active)
            diff = np.abs(fresh - prev[active])
            cur[active] = fresh
            err[active] = diff
            ok = diff < np.maximum(tol * np.abs(fresh), floor)
            done[active[ok]] = True
            prev[active] = fresh
            panels_used[sel[active]] = mult ** d * int(np.prod(key))
            if np.all(done):
                break
        if not np.all(done):
            raise QuadratureNotConverged(
                "batched transform: no convergence after 6 panel doublings",
                previous=None, latest=None)
        values[sel] = cur
        errors[sel] = err
    return values, errors, panels_used


def _ruled_batch(measure: SurfaceMeasure, xis: np.ndarray, tol: float) -> np.ndarray:
    chart, k, u_factors, v_factors = _ruled_parts(measure)
    if k != 1:
        return np.array([fourier_full(measure, xi, tol).value for xi in xis])
    xis = np.asarray(xis, dtype=float)
    rhos = np.linalg.norm(xis, axis=1)
    etas = xis / rhos[:, None]

    probe = chart.u_box.grid(65)
    tables = []
    for l, r in enumerate(chart.rulings):
        th = np.asarray(r.value(probe)) @ xis.T
        needed = 1.05 * float(np.max(np.abs(th))) + 1.0
        tables.append(_get_table(measure, l, v_factors[l], needed))

    base_jac = np.asarray(chart.base_jac(probe))
    ruling_jacs = [np.asarray(r.jac(probe)) for r in chart.rulings]
    rows = np.stack([
        base_jac + sum(vl * rj for vl, rj in zip(corner, ruling_jacs))
        for corner in iter_product(*[f.support for f in v_factors])])
    proj = np.abs(np.einsum("cpkd,sd->scpk", rows, etas))
    bounds = 1.05 * proj.max(axis=(1, 2))[:, 0]        # (S,)

    lo, hi = chart.u_box.lo[0], chart.u_box.hi[0]
    length = hi - lo
    lam = 2.0 * math.pi * rhos
    panels = np.maximum(4, np.ceil(3.0 * lam * length * bounds / 16.0).astype(int))
    floor = 1e-13 * measure.mass

    out = np.empty(len(xis), dtype=complex)
    # quantize panel counts geometrically so rows share grids
    quant = np.power(2.0, np.ceil(np.log2(panels) / 0.25) * 0.25)
    quant = np.maximum(4, np.ceil(quant).astype(int))
    for q in np.unique(quant):
        sel = np.flatnonzero(quant == q)
        xis_sel = np.ascontiguousarray(xis[sel])
        vals = []
        for p in (int(q), 2 * int(q)):
            nodes, weights = _axis_rule_cached(lo, hi, p)
            center, rulings, udens = _grid_data(measure, nodes[:, None])
            wdens = weights * udens
            piece = np.empty(len(sel), dtype=complex)
            t0, t1 = tables[0], tables[-1]
            if len(tables) == 1:
                _batch_kernel_1(xis_sel, center, rulings[0], wdens,
                                t0.theta0, t0.dtheta, t0.coef.shape[1], t0.coef, piece)
            elif len(tables) == 2:
                _batch_kernel_2(xis_sel, center, rulings[0], rulings[1], wdens,
                                t0.theta0, t0.dtheta, t0.coef.shape[1], t0.coef,
                                t1.theta0, t1.dtheta, t1.coef.shape[1], t1.coef, piece)
            else:
                expo = (-2j * math.pi) * (xis_sel @ center.T)
                np.exp(expo, out=expo)
                for l in range(len(tables)):
                    expo *= tables[l].demodulated(xis_sel @ rulings[l].T)
                piece[:] = expo @ wdens
            vals.append(piece)
        diff = np.abs(vals[1] - vals[0])
        bad = diff >= np.maximum(tol * np.abs(vals[1]), floor)
        if np.any(bad):
            for i in np.flatnonzero(bad):
                vals[1][i] = fourier_full(measure, xis[sel[i]], tol).value
        out[sel] = vals[1]
    return out


_BATCH_POINTS = 3_000_000
_axis_rule_cache: dict = {}


def _axis_rule_cached(lo: float, hi: float, panels: int):
    key = (lo, hi, panels)
    rule = _axis_rule_cache.get(key)
    if rule is None:
        from .oscillatory import _axis_rule
        rule = _axis_rule(lo, hi, panels)
        if len(_axis_rule_cache) > 64:
            _axis_rule_cache.clear()
        _axis_rule_cache[key] = rule
    return rule


def averaged_fourier_full(nu: AveragedMeasure, rho: float, tol: float = 1e-5,
                          inner_tol: float = 1e-8) -> QuadratureResult:
    """nu_hat(rho e_D) via the reduced base-dimensional outer integral.

    The outer integrand vanishes to all orders at the edge of the averaging
    support, so the uniform trapezoid rule converges superpolynomially and its
    node set nests under halving: doublings reuse every previous evaluation.
    Each outer node costs one inner transform mu_hat(rho N(s)), evaluated in
    shared-grid batches for one-dimensional bases.
    """
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if rho == 0.0:
        return QuadratureResult(value=complex(nu.mass), error_estimate=0.0,
                                panels_used=0, converged=True)
    chart = nu.chart

    if chart.u_dim != 1:
        return _averaged_fourier_generic(nu, rho, tol, inner_tol)

    lo = float(nu.weight_domain.lo[0])
    hi = float(nu.weight_domain.hi[0])

    def node_sum(svals: np.ndarray) -> complex:
        svec = svals[:, None]
        normals = np.stack([chart.normal_on_base(s) for s in svec])
        anchors = np.einsum("sd,sd->s", np.asarray(chart.base(svec)), normals)
        inner = _ruled_batch(nu.base, rho * normals, inner_tol)
        g = np.exp(2j * math.pi * rho * anchors) * inner * nu.weight(svec)
        return complex(np.sum(g))

    intervals = 64
    h = (hi - lo) / intervals
    # the weight vanishes at the support endpoints, so only interior nodes count
    prev = h * node_sum(lo + h * np.arange(1, intervals))
    cur = prev
    diff = math.inf
    for _ in range(6):
        mids = lo + (hi - lo) * (np.arange(intervals) + 0.5) / intervals
        intervals *= 2
        h *= 0.5
        cur = 0.5 * prev + h * node_sum(mids)
        diff = abs(cur - prev)
        if diff < max(tol * abs(cur), 1e-13 * nu.mass):
            return QuadratureResult(value=cur, error_estimate=diff,
                                    panels_used=intervals, converged=True)
        prev = cur
    raise QuadratureNotConverged(
        f"outer averaging integral: no convergence (last diff {diff:.3e})",
        previous=prev, latest=cur)


def _averaged_fourier_generic(nu: AveragedMeasure, rho: float, tol: float,
                              inner_tol: float) -> QuadratureResult:
    chart = nu.chart

    def amplitude(s):
        s = np.asarray(s, dtype=float)
        flat = s.reshape(-1, s.shape[-1])
        out = np.empty(flat.shape[0], dtype=complex)
        for i, si in enumerate(flat):
            N = chart.normal_on_base(si)
            anchor = float(chart.base_point(si) @ N)
            inner = fourier_full(nu.base, rho * N, tol=inner_tol).value
            out[i] = np.exp(2j * math.pi * rho * anchor) * inner
        return (out * nu.weight(flat)).reshape(s.shape[:-1])

    spec = OscillatorySpec(
        phase=lambda s: np.zeros(np.asarray(s).shape[:-1]),
        amplitude=amplitude, domain=nu.weight_domain, frequency=1.0,
        deriv_bound=np.zeros(chart.u_dim), mass_hint=nu.mass)
    return integrate(spec, tol)


def averaged_fourier(nu: AveragedMeasure, rho: float, tol: float = 1e-5) -> complex:
    return averaged_fourier_full(nu, rho, tol).value


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def measure_to_json(measure: SurfaceMeasure) -> str:
    """Catalog-backed tensor measures only: chart name + bump parameters."""
    if not isinstance(measure.density, TensorBump):
        raise TypeError("only tensor-product densities serialize")
    payload = {
        "schema": "1",
        "chart": measure.chart.name,
        "density": [{"center": f.center, "inner": f.inner, "outer": f.outer}
                    for f in measure.density.factors],
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def measure_from_json(text: str) -> SurfaceMeasure:
    payload = json.loads(text)
    entry = catalog_entry(payload["chart"])
    factors = tuple(Bump1D(center=f["center"], inner=f["inner"], outer=f["outer"])
                    for f in payload["density"])
    return SurfaceMeasure(entry.chart, TensorBump(factors), name=entry.name)
