"""Built-in surface catalog with curvature-rank annotations.

Each entry carries a chart, its expected curvature rank, and the expected
Fourier dimension of the underlying surface.  Ruled entries (tangent surfaces,
cylinder, light cone) are constructed so that the unit normal at the center of
the base box is the last coordinate axis, which is the anchor direction used
by the averaging construction.

Charts are also constructible from a JSON catalog file; see
``load_catalog_json`` for the schema.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .box import Box
from .geometry import Chart, RuledChart, RulingField

__all__ = [
    "CatalogEntry",
    "catalog",
    "catalog_entry",
    "load_catalog_json",
    "hyperboloid_ruling_chart",
    "circle_arc_chart",
]


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    chart: Chart
    expected_rank: int
    expected_fourier_dim: int
    description: str
    supports_averaging: bool


def _stack(*comps):
    return np.stack(np.broadcast_arrays(*comps), axis=-1)


# -- tangent surfaces of polynomial curves ----------------------------------

def _poly_curve_chart(derivs, n_rulings, u_box, v_box, ambient_dim, name,
                      scaled_normal=None):
    """Tangent-type ruled chart: base(u) = derivs[0], ruling_l = derivs[l]."""

    def at(order):
        fn = derivs[order]

        def call(u):
            t = np.asarray(u, dtype=float)[..., 0]
            return fn(t)

        return call

    def jac_of(order):
        fn = derivs[order]

        def call(u):
            t = np.asarray(u, dtype=float)[..., 0]
            return fn(t)[..., None, :]

        return call

    def hess_of(order):
        fn = derivs[order]

        def call(u):
            t = np.asarray(u, dtype=float)[..., 0]
            return fn(t)[..., None, None, :]

        return call

    rulings = [RulingField(value=at(l), jac=jac_of(l + 1), hess=hess_of(l + 2))
               for l in range(1, n_rulings + 1)]
    return RuledChart(base=at(0), base_jac=jac_of(1), base_hess=hess_of(2),
                      rulings=rulings, u_box=u_box, v_box=v_box,
                      ambient_dim=ambient_dim, name=name,
                      scaled_normal=scaled_normal)


def helix_tangent_chart(u_box: Box | None = None, v_box: Box | None = None) -> RuledChart:
    """Tangent surface of (t, t^2, t^3); curvature rank 1 away from v=0."""
    u_box = u_box or Box.make([-0.25], [0.25])
    v_box = v_box or Box.make([1.0], [2.0])

    def g0(t):
        return _stack(t, t ** 2, t ** 3)

    def g1(t):
        return _stack(np.ones_like(t), 2 * t, 3 * t ** 2)

    def g2(t):
        return _stack(np.zeros_like(t), 2 * np.ones_like(t), 6 * t)

    def g3(t):
        z = np.zeros_like(t)
        return _stack(z, z, 6 * np.ones_like(t))

    def scaled_normal(s):
        s = np.asarray(s, dtype=float)[..., 0]
        return _stack(3 * s ** 2, -3 * s, np.ones_like(s))

    return _poly_curve_chart([g0, g1, g2, g3], 1, u_box, v_box, 3,
                             "helix_tangent", scaled_normal)


def perturbed_helix_chart(u_box: Box | None = None, v_box: Box | None = None) -> RuledChart:
    """Tangent surface of (t, t^2 + t^4, t^3) on a small base interval."""
    u_box = u_box or Box.make([-0.1], [0.1])
    v_box = v_box or Box.make([1.0], [2.0])

    def g0(t):
        return _stack(t, t ** 2 + t ** 4, t ** 3)

    def g1(t):
        return _stack(np.ones_like(t), 2 * t + 4 * t ** 3, 3 * t ** 2)

    def g2(t):
        return _stack(np.zeros_like(t), 2 + 12 * t ** 2, 6 * t)

    def g3(t):
        z = np.zeros_like(t)
        return _stack(z, 24 * t, 6 * np.ones_like(t))

    def scaled_normal(s):
        s = np.asarray(s, dtype=float)[..., 0]
        return _stack(-3 * s ** 2 * (2 * s ** 2 - 1), -3 * s, 6 * s ** 2 + 1)

    return _poly_curve_chart([g0, g1, g2, g3], 1, u_box, v_box, 3,
                             "perturbed_helix", scaled_normal)


def moment_curve_tangent_chart(u_box: Box | None = None, v_box: Box | None = None) -> RuledChart:
    """Rank-1 hypersurface in R^4: gamma + v1 gamma' + v2 gamma'' for the moment curve."""
    u_box = u_box or Box.make([-0.15], [0.15])
    v_box = v_box or Box.make([0.5, 0.5], [1.0, 1.0])

    def g0(t):
        return _stack(t, t ** 2, t ** 3, t ** 4)

    def g1(t):
        return _stack(np.ones_like(t), 2 * t, 3 * t ** 2, 4 * t ** 3)

    def g2(t):
        z = np.zeros_like(t)
        return _stack(z, 2 * np.ones_like(t), 6 * t, 12 * t ** 2)

    def g3(t):
        z = np.zeros_like(t)
        return _stack(z, z, 6 * np.ones_like(t), 24 * t)

    def g4(t):
        z = np.zeros_like(t)
        return _stack(z, z, z, 24 * np.ones_like(t))

    return _poly_curve_chart([g0, g1, g2, g3, g4], 2, u_box, v_box, 4,
                             "moment_curve_tangent")


# -- cylinder / cone style charts -------------------------------------------

def cylinder_chart(u_box: Box | None = None, v_box: Box | None = None) -> RuledChart:
    """Circular cylinder S^1 x R, oriented so N(0) = e3."""
    u_box = u_box or Box.make([-0.25], [0.25])
    v_box = v_box or Box.make([1.0], [2.0])

    def base(u):
        t = np.asarray(u, dtype=float)[..., 0]
        return _stack(np.sin(t), np.zeros_like(t), np.cos(t))

    def base_jac(u):
        t = np.asarray(u, dtype=float)[..., 0]
        return _stack(np.cos(t), np.zeros_like(t), -np.sin(t))[..., None, :]

    def base_hess(u):
        t = np.asarray(u, dtype=float)[..., 0]
        return _stack(-np.sin(t), np.zeros_like(t), -np.cos(t))[..., None, None, :]

    def w(u):
        t = np.asarray(u, dtype=float)[..., 0]
        z = np.zeros_like(t)
        return _stack(z, np.ones_like(t), z)

    def wz_jac(u):
        t = np.asarray(u, dtype=float)[..., 0]
        return np.zeros(t.shape + (1, 3))

    def wz_hess(u):
        t = np.asarray(u, dtype=float)[..., 0]
        return np.zeros(t.shape + (1, 1, 3))

    ruling = RulingField(value=w, jac=wz_jac, hess=wz_hess)
    return RuledChart(base=base, base_jac=base_jac, base_hess=base_hess,
                      rulings=[ruling], u_box=u_box, v_box=v_box,
                      ambient_dim=3, name="cylinder")


_CONE_BETA = 3.0 * math.pi / 4.0
_CONE_ROT = np.array([
    [math.cos(_CONE_BETA), 0.0, -math.sin(_CONE_BETA)],
    [0.0, 1.0, 0.0],
    [math.sin(_CONE_BETA), 0.0, math.cos(_CONE_BETA)],
])


def light_cone_chart(u_box: Box | None = None, v_box: Box | None = None) -> RuledChart:
    """Patch of the cone {h (cos t, sin t, 1)}, rotated so N(0) = e3."""
    u_box = u_box or Box.make([-0.25], [0.25])
    v_box = v_box or Box.make([1.0], [2.0])

    def base(u):
        t = np.asarray(u, dtype=float)[..., 0]
        return np.zeros(t.shape + (3,))

    def base_jac(u):
        t = np.asarray(u, dtype=float)[..., 0]
        return np.zeros(t.shape + (1, 3))

    def base_hess(u):
        t = np.asarray(u, dtype=float)[..., 0]
        return np.zeros(t.shape + (1, 1, 3))

    def w(u):
        t = np.asarray(u, dtype=float)[..., 0]
        raw = _stack(np.cos(t), np.sin(t), np.ones_like(t))
        return raw @ _CONE_ROT.T

    def w_jac(u):
        t = np.asarray(u, dtype=float)[..., 0]
        raw = _stack(-np.sin(t), np.cos(t), np.zeros_like(t))
        return (raw @ _CONE_ROT.T)[..., None, :]

    def w_hess(u):
        t = np.asarray(u, dtype=float)[..., 0]
        raw = _stack(-np.cos(t), -np.sin(t), np.zeros_like(t))
        return (raw @ _CONE_ROT.T)[..., None, None, :]

    ruling = RulingField(value=w, jac=w_jac, hess=w_hess)
    return RuledChart(base=base, base_jac=base_jac, base_hess=base_hess,
                      rulings=[ruling], u_box=u_box, v_box=v_box,
                      ambient_dim=3, name="light_cone")


# -- plain (non-ruled) charts ------------------------------------------------

def hyperplane_chart(domain: Box | None = None) -> Chart:
    domain = domain or Box.make([-1.0, -1.0], [1.0, 1.0])

    def evaluate(p):
        p = np.asarray(p, dtype=float)
        return _stack(p[..., 0], p[..., 1], np.zeros(p.shape[:-1]))

    def jacobian(p):
        p = np.asarray(p, dtype=float)
        out = np.zeros(p.shape[:-1] + (2, 3))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = 1.0
        return out

    def hessian(p):
        p = np.asarray(p, dtype=float)
        return np.zeros(p.shape[:-1] + (2, 2, 3))

    return Chart(evaluate=evaluate, domain=domain, ambient_dim=3,
                 jacobian=jacobian, hessian=hessian, name="hyperplane")


def sphere_patch_chart(domain: Box | None = None) -> Chart:
    """Graph patch of the unit sphere around the north pole."""
    domain = domain or Box.make([-0.25, -0.25], [0.25, 0.25])

    def height(p):
        p = np.asarray(p, dtype=float)
        return np.sqrt(1.0 - p[..., 0] ** 2 - p[..., 1] ** 2)

    def evaluate(p):
        p = np.asarray(p, dtype=float)
        return _stack(p[..., 0], p[..., 1], height(p))

    def jacobian(p):
        p = np.asarray(p, dtype=float)
        g = height(p)
        out = np.zeros(p.shape[:-1] + (2, 3))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = 1.0
        out[..., 0, 2] = -p[..., 0] / g
        out[..., 1, 2] = -p[..., 1] / g
        return out

    def hessian(p):
        p = np.asarray(p, dtype=float)
        g = height(p)
        out = np.zeros(p.shape[:-1] + (2, 2, 3))
        for i in range(2):
            for j in range(2):
                d = 1.0 if i == j else 0.0
                out[..., i, j, 2] = -(d / g + p[..., i] * p[..., j] / g ** 3)
        return out

    return Chart(evaluate=evaluate, domain=domain, ambient_dim=3,
                 jacobian=jacobian, hessian=hessian, name="sphere_patch")


def sinusoid_rank2_chart(u_box: Box | None = None, v_box: Box | None = None) -> RuledChart:
    """Rank-2 ruled hypersurface in R^4 built from damped sinusoids.

    Base point (t, sin t e^-s, sin 2t e^-4s, sin 3t e^-9s) with the single
    ruling along the t-derivative.  The default box avoids t = 0, where the
    immersion degenerates.
    """
    u_box = u_box or Box.make([0.6, -0.15], [0.9, 0.15])
    v_box = v_box or Box.make([0.1], [0.3])

    def base(u):
        u = np.asarray(u, dtype=float)
        t, s = u[..., 0], u[..., 1]
        return _stack(t, np.sin(t) * np.exp(-s),
                      np.sin(2 * t) * np.exp(-4 * s), np.sin(3 * t) * np.exp(-9 * s))

    def d_t(u):
        u = np.asarray(u, dtype=float)
        t, s = u[..., 0], u[..., 1]
        return _stack(np.ones_like(t), np.cos(t) * np.exp(-s),
                      2 * np.cos(2 * t) * np.exp(-4 * s), 3 * np.cos(3 * t) * np.exp(-9 * s))

    def d_s(u):
        u = np.asarray(u, dtype=float)
        t, s = u[..., 0], u[..., 1]
        z = np.zeros_like(t)
        return _stack(z, -np.sin(t) * np.exp(-s),
                      -4 * np.sin(2 * t) * np.exp(-4 * s), -9 * np.sin(3 * t) * np.exp(-9 * s))

    def d_ts(u):
        u = np.asarray(u, dtype=float)
        t, s = u[..., 0], u[..., 1]
        z = np.zeros_like(t)
        return _stack(z, -np.cos(t) * np.exp(-s),
                      -8 * np.cos(2 * t) * np.exp(-4 * s), -27 * np.cos(3 * t) * np.exp(-9 * s))

    def d_ss(u):
        u = np.asarray(u, dtype=float)
        t, s = u[..., 0], u[..., 1]
        z = np.zeros_like(t)
        return _stack(z, np.sin(t) * np.exp(-s),
                      16 * np.sin(2 * t) * np.exp(-4 * s), 81 * np.sin(3 * t) * np.exp(-9 * s))

    def d_tss(u):
        u = np.asarray(u, dtype=float)
        t, s = u[..., 0], u[..., 1]
        z = np.zeros_like(t)
        return _stack(z, np.cos(t) * np.exp(-s),
                      32 * np.cos(2 * t) * np.exp(-4 * s), 243 * np.cos(3 * t) * np.exp(-9 * s))

    def base_jac(u):
        return np.stack([d_t(u), d_s(u)], axis=-2)

    def base_hess(u):
        # d2(base)/dt2 happens to coincide with d(base)/ds for these sinusoids
        return _assemble_hess(d_s(u), d_ts(u), d_ss(u))

    def w_jac(u):
        return np.stack([d_s(u), d_ts(u)], axis=-2)

    def w_hess(u):
        return _assemble_hess(d_ts(u), d_ss(u), d_tss(u))

    ruling = RulingField(value=d_t, jac=w_jac, hess=w_hess)
    return RuledChart(base=base, base_jac=base_jac, base_hess=base_hess,
                      rulings=[ruling], u_box=u_box, v_box=v_box,
                      ambient_dim=4, name="sinusoid_rank2")


def _assemble_hess(tt, ts, ss):
    row1 = np.stack([tt, ts], axis=-2)
    row2 = np.stack([ts, ss], axis=-2)
    return np.stack([row1, row2], axis=-3)


# -- auxiliary charts (controls and product factors) -------------------------

def hyperboloid_ruling_chart(u_box: Box | None = None, v_box: Box | None = None) -> RuledChart:
    """Ruling of x^2+y^2 = z^2+1: ruled, but normals rotate along rulings."""
    u_box = u_box or Box.make([-0.25], [0.25])
    v_box = v_box or Box.make([0.25], [1.0])

    def base(u):
        t = np.asarray(u, dtype=float)[..., 0]
        return _stack(np.cos(t), np.sin(t), np.zeros_like(t))

    def base_jac(u):
        t = np.asarray(u, dtype=float)[..., 0]
        return _stack(-np.sin(t), np.cos(t), np.zeros_like(t))[..., None, :]

    def base_hess(u):
        t = np.asarray(u, dtype=float)[..., 0]
        return _stack(-np.cos(t), -np.sin(t), np.zeros_like(t))[..., None, None, :]

    def w(u):
        t = np.asarray(u, dtype=float)[..., 0]
        return _stack(-np.sin(t), np.cos(t), np.ones_like(t))

    def w_jac(u):
        t = np.asarray(u, dtype=float)[..., 0]
        return _stack(-np.cos(t), -np.sin(t), np.zeros_like(t))[..., None, :]

    def w_hess(u):
        t = np.asarray(u, dtype=float)[..., 0]
        return _stack(np.sin(t), -np.cos(t), np.zeros_like(t))[..., None, None, :]

    ruling = RulingField(value=w, jac=w_jac, hess=w_hess)
    return RuledChart(base=base, base_jac=base_jac, base_hess=base_hess,
                      rulings=[ruling], u_box=u_box, v_box=v_box,
                      ambient_dim=3, name="hyperboloid_ruling")


def circle_arc_chart(domain: Box | None = None) -> Chart:
    """Unit-circle arc in R^2 (curvature 1); a product-measure factor."""
    domain = domain or Box.make([-0.6], [0.6])

    def evaluate(p):
        t = np.asarray(p, dtype=float)[..., 0]
        return _stack(np.cos(t), np.sin(t))

    def jacobian(p):
        t = np.asarray(p, dtype=float)[..., 0]
        return _stack(-np.sin(t), np.cos(t))[..., None, :]

    def hessian(p):
        t = np.asarray(p, dtype=float)[..., 0]
        return _stack(-np.cos(t), -np.sin(t))[..., None, None, :]

    return Chart(evaluate=evaluate, domain=domain, ambient_dim=2,
                 jacobian=jacobian, hessian=hessian, name="circle_arc")


# -- the catalog --------------------------------------------------------------

_BUILDERS = {
    "hyperplane": (hyperplane_chart, 0, 0, "flat graph", False,
                   "Flat plane x3 = 0; every principal curvature vanishes."),
    "cylinder": (cylinder_chart, 1, 1, "S^1 x R", True,
                 "Circular cylinder; one curved direction, one flat ruling."),
    "sphere_patch": (sphere_patch_chart, 2, 2, "round sphere cap", False,
                     "Unit-sphere graph patch; nonvanishing Gaussian curvature."),
    "light_cone": (light_cone_chart, 1, 1, "cone through the origin", True,
                   "Cone over the circle at height 1, rotated to anchor N(0)=e3."),
    "helix_tangent": (helix_tangent_chart, 1, 1, "tangent surface", True,
                      "Tangent surface of the cubic curve (t, t^2, t^3)."),
    "perturbed_helix": (perturbed_helix_chart, 1, 1, "tangent surface", True,
                        "Tangent surface of (t, t^2 + t^4, t^3)."),
    "moment_curve_tangent": (moment_curve_tangent_chart, 1, 1,
                             "tangent-type hypersurface in R^4", True,
                             "gamma + v1 gamma' + v2 gamma'' for gamma(t) = (t, t^2, t^3, t^4)."),
    "sinusoid_rank2": (sinusoid_rank2_chart, 2, 2, "rank-2 ruled hypersurface in R^4", False,
                       "Damped-sinusoid ruled surface; two curved directions, one flat ruling."),
}


def catalog_entry(name: str) -> CatalogEntry:
    try:
        builder, rank, fdim, _, averaging, desc = _BUILDERS[name]
    except KeyError:
        raise KeyError(f"unknown catalog surface {name!r}; "
                       f"available: {', '.join(sorted(_BUILDERS))}") from None
    return CatalogEntry(name=name, chart=builder(), expected_rank=rank,
                        expected_fourier_dim=fdim, description=desc,
                        supports_averaging=averaging)


def catalog() -> dict[str, CatalogEntry]:
    """All built-in surfaces, keyed by name."""
    return {name: catalog_entry(name) for name in _BUILDERS}


def load_catalog_json(path) -> dict[str, CatalogEntry]:
    """Build catalog entries from a JSON file.

    Schema: {"surfaces": [{"name": <builder name>,
                           "expected_rank": int, "expected_fourier_dim": int,
                           "u_domain": [[lo, hi], ...], "v_domain": [[lo, hi], ...],
                           "domain": [[lo, hi], ...]}, ...]}

    ``u_domain``/``v_domain`` override the boxes of ruled builders; ``domain``
    overrides the box of plain charts.  Omitted boxes keep built-in defaults.
    """
    with open(path) as f:
        payload = json.load(f)
    out: dict[str, CatalogEntry] = {}
    for item in payload["surfaces"]:
        name = item["name"]
        builder, rank, fdim, _, averaging, desc = _BUILDERS[name]
        kwargs = {}
        if "u_domain" in item:
            pairs = item["u_domain"]
            kwargs["u_box"] = Box.make([p[0] for p in pairs], [p[1] for p in pairs])
        if "v_domain" in item:
            pairs = item["v_domain"]
            kwargs["v_box"] = Box.make([p[0] for p in pairs], [p[1] for p in pairs])
        if "domain" in item:
            pairs = item["domain"]
            kwargs["domain"] = Box.make([p[0] for p in pairs], [p[1] for p in pairs])
        entry = CatalogEntry(
            name=name,
            chart=builder(**kwargs),
            expected_rank=int(item.get("expected_rank", rank)),
            expected_fourier_dim=int(item.get("expected_fourier_dim", fdim)),
            description=desc,
            supports_averaging=averaging,
        )
        out[name] = entry
    return out
