"""High-frequency oscillatory quadrature and stationary-phase machinery.

The central object is an :class:`OscillatorySpec` describing

    I(lambda) = integral over a box of  exp(i * sign * lambda * phase(z)) * amplitude(z) dz

with a smooth phase and a smooth compactly supported amplitude.  ``integrate``
evaluates it with composite Gauss-Legendre panels sized from the phase
gradient, and certifies the value by panel doubling.  ``find_critical_points``
locates stationary points of the phase, and ``stationary_phase_leading``
evaluates the classical leading-order asymptotics at a nondegenerate critical
point.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .box import Box
from .errors import DegenerateCritical, QuadratureNotConverged

__all__ = [
    "OscillatorySpec",
    "QuadratureResult",
    "StationaryPointReport",
    "CriticalPointSet",
    "ErrorScan",
    "integrate",
    "find_critical_points",
    "stationary_phase_leading",
    "asymptotic_error_scan",
]

GL_ORDER = 16
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(GL_ORDER)

# Evaluation chunk cap keeps tensor grids inside a few hundred MB.
_CHUNK_POINTS = 4_000_000

_FD_STEP = 1e-5


@dataclass(frozen=True)
class OscillatorySpec:
    """Phase/amplitude/frequency triple on a box domain (dim <= 3).

    ``phase`` and ``amplitude`` must be vectorized: they take an (..., n)
    array of points and return (...,).  ``gradient`` and ``hessian`` are
    optional analytic derivatives of the phase; central finite differences
    (step 1e-5) are used when they are absent.  ``deriv_bound`` optionally
    supplies per-axis bounds on |d(phase)/dz_i| used for panel sizing; when
    the amplitude itself carries oscillation (complex ruled-transform
    factors), the bound must include it.
    """

    phase: Callable
    amplitude: Callable
    domain: Box
    frequency: float
    sign: int = 1
    gradient: Callable | None = None
    hessian: Callable | None = None
    deriv_bound: Sequence[float] | None = None
    mass_hint: float | None = None

    def __post_init__(self):
        if self.domain.dim > 3:
            raise ValueError("oscillatory quadrature supports dim <= 3")
        if self.frequency <= 0:
            raise ValueError("frequency must be positive")
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")

    @property
    def dim(self) -> int:
        return self.domain.dim

    def gradient_at(self, p):
        p = np.asarray(p, dtype=float)
        if self.gradient is not None:
            return np.asarray(self.gradient(p))
        g = np.empty(p.shape, dtype=float)
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = _FD_STEP
            g[..., i] = (self.phase(p + e) - self.phase(p - e)) / (2.0 * _FD_STEP)
        return g

    def hessian_at(self, p):
        """Phase Hessian; falls back to central differences of the gradient."""
        p = np.asarray(p, dtype=float)
        if self.hessian is not None:
            return np.asarray(self.hessian(p))
        n = self.dim
        h = np.empty(p.shape[:-1] + (n, n), dtype=float)
        for i in range(n):
            e = np.zeros(n)
            e[i] = _FD_STEP
            h[..., i, :] = (self.gradient_at(p + e) - self.gradient_at(p - e)) / (2.0 * _FD_STEP)
        return 0.5 * (h + np.swapaxes(h, -1, -2))


@dataclass(frozen=True)
class QuadratureResult:
    value: complex
    error_estimate: float
    panels_used: int
    converged: bool


def _axis_rule(lo: float, hi: float, panels: int):
    """Composite Gauss-Legendre nodes/weights with `panels` panels of order 16."""
    h = (hi - lo) / panels
    centers = lo + h * (np.arange(panels) + 0.5)
    x = (centers[:, None] + 0.5 * h * _GL_NODES[None, :]).ravel()
    w = np.tile(0.5 * h * _GL_WEIGHTS, panels)
    return x, w


def _integrand(spec: OscillatorySpec, pts: np.ndarray) -> np.ndarray:
    amp = np.asarray(spec.amplitude(pts))
    ph = np.asarray(spec.phase(pts), dtype=float)
    return amp * np.exp((1j * spec.sign * spec.frequency) * ph)


def _tensor_value(spec: OscillatorySpec, panels: np.ndarray) -> complex:
    """Tensor-product composite GL evaluation, chunked with fixed summation order."""
    rules = [_axis_rule(spec.domain.lo[i], spec.domain.hi[i], int(panels[i]))
             for i in range(spec.dim)]
    n = spec.dim
    if n == 1:
        x, w = rules[0]
        parts = []
        for i0 in range(0, x.size, _CHUNK_POINTS):
            sl = slice(i0, i0 + _CHUNK_POINTS)
            parts.append(np.sum(_integrand(spec, x[sl, None]) * w[sl]))
        return complex(sum(parts))

    tail_axes = rules[1:]
    tail_size = int(np.prod([r[0].size for r in tail_axes]))
    mesh = np.meshgrid(*[r[0] for r in tail_axes], indexing="ij")
    tail_pts = np.stack([m.ravel() for m in mesh], axis=-1)
    wmesh = np.meshgrid(*[r[1] for r in tail_axes], indexing="ij")
    tail_w = np.prod(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1)

    x0, w0 = rules[0]
    rows_per_chunk = max(1, _CHUNK_POINTS // max(tail_size, 1))
    parts = []
    for i0 in range(0, x0.size, rows_per_chunk):
        xs = x0[i0:i0 + rows_per_chunk]
        ws = w0[i0:i0 + rows_per_chunk]
        pts = np.empty((xs.size, tail_size, n))
        pts[:, :, 0] = xs[:, None]
        pts[:, :, 1:] = tail_pts[None, :, :]
        vals = _integrand(spec, pts)
        parts.append(np.sum(vals * (ws[:, None] * tail_w[None, :])))
    return complex(sum(parts))


def _amp_mass(spec: OscillatorySpec) -> float:
    """Integral of |amplitude|, the scale for the absolute quadrature floor."""
    if spec.mass_hint is not None:
        return float(spec.mass_hint)
    rules = [_axis_rule(spec.domain.lo[i], spec.domain.hi[i], 8) for i in range(spec.dim)]
    mesh = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    wmesh = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    w = np.prod(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1)
    return float(np.sum(np.abs(np.asarray(spec.amplitude(pts))) * w))


def _deriv_bounds(spec: OscillatorySpec) -> np.ndarray:
    if spec.deriv_bound is not None:
        return np.atleast_1d(np.asarray(spec.deriv_bound, dtype=float))
    per_axis = {1: 257, 2: 33, 3: 17}[spec.dim]
    pts = spec.domain.grid(per_axis)
    g = spec.gradient_at(pts)
    return np.max(np.abs(g), axis=0)


def base_panels(spec: OscillatorySpec) -> np.ndarray:
    """Per-axis panel counts: max(4, ceil(3 * lambda * L * max|dphase| / 16))."""
    bounds = _deriv_bounds(spec)
    lengths = spec.domain.lengths
    counts = np.ceil(3.0 * spec.frequency * lengths * bounds / GL_ORDER)
    return np.maximum(4, counts.astype(int))


def integrate(spec: OscillatorySpec, tol: float = 1e-9) -> QuadratureResult:
    """Adaptive composite Gauss-Legendre value of the oscillatory integral.

    Starts from the gradient-sized panel counts and doubles all axes until two
    successive refinements differ by less than max(tol*|value|, 1e-13*mass).
    Raises QuadratureNotConverged (carrying the last two values) after six
    doublings.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    floor = 1e-13 * _amp_mass(spec)
    panels = base_panels(spec)
    prev = _tensor_value(spec, panels)
    cur = prev
    diff = math.inf
    for _ in range(6):
        panels = panels * 2
        cur = _tensor_value(spec, panels)
        diff = abs(cur - prev)
        if diff < max(tol * abs(cur), floor):
            return QuadratureResult(value=cur, error_estimate=diff,
                                    panels_used=int(np.prod(panels)), converged=True)
        prev, cur = cur, prev
    raise QuadratureNotConverged(
        f"no convergence after 6 panel doublings (last diff {diff:.3e})",
        previous=cur, latest=prev)


# ---------------------------------------------------------------------------
# critical points and stationary phase
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StationaryPointReport:
    """Critical point of the phase with its Hessian data.

    ``signature_positive`` counts positive Hessian eigenvalues; the leading
    asymptotic term of the integral is available through :meth:`leading`.
    """

    point: np.ndarray
    phase_value: float
    hessian: np.ndarray
    signature_positive: int
    nondegenerate: bool
    det: float
    amp_at_point: complex
    dim: int
    sign: int = 1

    def leading(self, lam: float) -> complex:
        return stationary_phase_leading(self, self.amp_at_point, lam, sign=self.sign)


class CriticalPointSet(list):
    """List of StationaryPointReport with the count of dropped Newton seeds."""

    def __init__(self, points, stalled_seeds: int):
        super().__init__(points)
        self.stalled_seeds = stalled_seeds


def _newton_polish(spec: OscillatorySpec, seeds: np.ndarray,
                   max_iter: int = 100, grad_tol: float = 1e-12):
    """Damped Newton on grad(phase)=0, batched over seeds.

    Returns (converged points, number of stalled seeds).  A seed stalls when
    it exhausts the iteration budget, leaves the domain irrecoverably, or its
    Hessian is numerically singular before reaching the gradient tolerance.
    """
    z = seeds.astype(float).copy()
    active = np.ones(len(z), dtype=bool)
    done = np.zeros(len(z), dtype=bool)
    pad = 0.05 * float(np.max(spec.domain.lengths))
    for _ in range(max_iter):
        if not np.any(active):
            break
        g = spec.gradient_at(z[active])
        gn = np.max(np.abs(g), axis=-1)
        newly = gn < grad_tol
        idx = np.flatnonzero(active)
        done[idx[newly]] = True
        active[idx[newly]] = False
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        g = spec.gradient_at(z[idx])
        H = spec.hessian_at(z[idx])
        dets = np.abs(np.linalg.det(H))
        solvable = dets > 1e-300
        # singular Hessian with nonzero gradient: Newton cannot proceed
        active[idx[~solvable]] = False
        idx = idx[solvable]
        if idx.size == 0:
            break
        step = np.linalg.solve(H[solvable], -g[solvable][..., None])[..., 0]
        base_norm = np.max(np.abs(g[solvable]), axis=-1)
        scale = np.ones(idx.size)
        trial = z[idx] + step
        for _ in range(20):
            tn = np.max(np.abs(spec.gradient_at(trial)), axis=-1)
            worse = (tn > base_norm) & (base_norm > 0)
            if not np.any(worse):
                break
            scale[worse] *= 0.5
            trial[worse] = z[idx[worse]] + scale[worse, None] * step[worse]
        z[idx] = trial
        off = ~np.array([spec.domain.contains(p, pad=pad) for p in z[idx]])
        active[idx[off]] = False

    converged = []
    for i in np.flatnonzero(done):
        converged.append(z[i])
    stalled = int(len(z) - done.sum())
    return converged, stalled


def find_critical_points(spec: OscillatorySpec, seeds_per_axis: int = 64,
                         dedup_tol: float = 1e-8) -> CriticalPointSet:
    """All zeros of the phase gradient inside the amplitude support.

    Dense grid seeding (seeds_per_axis per axis) followed by damped-Newton
    polishing to |grad| < 1e-12; results are deduplicated at distance 1e-8 and
    annotated with Hessian data.  Stalled seeds are dropped and counted on the
    returned set.
    """
    seeds = spec.domain.grid(seeds_per_axis)
    points, stalled = _newton_polish(spec, seeds)
    kept: list[np.ndarray] = []
    for p in points:
        if not spec.domain.contains(p, pad=1e-12):
            continue
        if abs(complex(np.asarray(spec.amplitude(p[None, :]))[0])) == 0.0:
            continue
        if any(np.max(np.abs(p - q)) < dedup_tol for q in kept):
            continue
        kept.append(p)
    kept.sort(key=lambda p: tuple(p))

    reports = []
    for p in kept:
        H = np.asarray(spec.hessian_at(p[None, :]))[0]
        H = 0.5 * (H + H.T)
        eigs = np.linalg.eigvalsh(H)
        det = float(np.linalg.det(H))
        reports.append(StationaryPointReport(
            point=p,
            phase_value=float(np.asarray(spec.phase(p[None, :]))[0]),
            hessian=H,
            signature_positive=int(np.sum(eigs > 0)),
            nondegenerate=bool(abs(det) > 1e-9),
            det=det,
            amp_at_point=complex(np.asarray(spec.amplitude(p[None, :]))[0]),
            dim=spec.dim,
            sign=spec.sign,
        ))
    return CriticalPointSet(reports, stalled)


def stationary_phase_leading(report: StationaryPointReport, psi_at_point,
                             lam: float, sign: int = 1) -> complex:
    """Leading-order stationary phase term at a nondegenerate critical point.

    For I = integral exp(i*sign*lam*phase) * psi with Hessian H at the critical
    point z0 (m positive eigenvalues out of n) the term is

        psi(z0) * (2*pi/lam)^(n/2) * |det H|^(-1/2)
                * exp(i*sign*pi*(2m-n)/4) * exp(i*sign*lam*phase(z0)).

    The phase factor uses the Hessian signature with principal-branch complex
    powers; the convention is validated against direct quadrature in the test
    suite.
    """
    if not report.nondegenerate:
        raise DegenerateCritical("Hessian determinant below 1e-9; no leading term")
    if lam < 1.0:
        raise ValueError("leading term is asymptotic; require lam >= 1")
    n = report.dim
    m = report.signature_positive
    mag = (2.0 * math.pi / lam) ** (0.5 * n) / math.sqrt(abs(report.det))
    phase = sign * (math.pi * (2 * m - n) / 4.0 + lam * report.phase_value)
    return complex(psi_at_point) * mag * complex(math.cos(phase), math.sin(phase))


# ---------------------------------------------------------------------------
# asymptotic error scan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanRow:
    lam: float
    value: complex
    leading: complex
    scaled_error: float


@dataclass(frozen=True)
class ErrorScan:
    rows: tuple[ScanRow, ...]
    dim: int

    @property
    def ratio(self) -> float:
        """max/min of the scaled error column (boundedness indicator)."""
        scaled = [r.scaled_error for r in self.rows]
        lo = min(scaled)
        if lo == 0.0:
            return math.inf
        return max(scaled) / lo

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["lambda", "re", "im", "abs",
                        "leading_re", "leading_im", "scaled_error"])
            for r in self.rows:
                w.writerow([f"{r.lam:.17g}",
                            f"{r.value.real:.17g}", f"{r.value.imag:.17g}",
                            f"{abs(r.value):.17g}",
                            f"{r.leading.real:.17g}", f"{r.leading.imag:.17g}",
                            f"{r.scaled_error:.17g}"])


def asymptotic_error_scan(make_spec: Callable[[float], OscillatorySpec],
                          lambdas: Sequence[float], tol: float = 1e-10) -> ErrorScan:
    """Table of |integrate - leading| * lam^((n+1)/2) over a frequency grid.

    The critical points are located once (they do not depend on lam); any
    degenerate critical point inside the support raises DegenerateCritical.
    Multiple nondegenerate critical points contribute additively.
    """
    lambdas = [float(l) for l in lambdas]
    first = make_spec(lambdas[0])
    reports = find_critical_points(first)
    if not reports:
        raise DegenerateCritical("no critical point found inside the support")
    if any(not r.nondegenerate for r in reports):
        raise DegenerateCritical("degenerate critical point inside the support")
    n = first.dim
    rows = []
    for lam in lambdas:
        spec = make_spec(lam)
        res = integrate(spec, tol=tol)
        lead = sum(stationary_phase_leading(r, r.amp_at_point, lam, sign=spec.sign)
                   for r in reports)
        rows.append(ScanRow(lam=lam, value=res.value, leading=lead,
                            scaled_error=abs(res.value - lead) * lam ** (0.5 * (n + 1))))
    return ErrorScan(rows=tuple(rows), dim=n)
