"""Decay-exponent estimation, direction scans, and dimension certificates.

``fit_decay`` turns transform samples along a ray into a log2-log2 power-law
fit.  ``direction_scan`` repeats that over a sphere of directions; its summary
(the algebraic maximum of the slopes, i.e. the slowest decay) upper-bounds the
decay exponent the measure supports.  ``certificate`` runs the full pipeline
for a catalog surface: verify the curvature rank, fit the averaged-measure
transform along the anchor axis against the -rank/2 target, check the
transfer inequality |nu_hat(rho e_D)| <= ||psi||_1 * max_s |mu_hat(rho N(s))|,
and scan the base measure over directions.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass

import numpy as np

from .catalog import CatalogEntry
from .errors import AllFloored, RankMismatch
from .geometry import RuledChart, rank_at, unit_normal
from .measure import (AveragedMeasure, SurfaceMeasure, averaged_fourier_full,
                      default_measure, fourier_batch, fourier_full)

__all__ = [
    "DecayFit",
    "SampleRow",
    "DirectionScan",
    "DimensionCertificate",
    "ProductRuleReport",
    "fit_decay",
    "decay_samples",
    "fibonacci_sphere",
    "scan_directions",
    "direction_scan",
    "certificate",
    "product_rule_check",
    "write_samples_csv",
]

FLOOR_FACTOR = 1e-13
DEFAULT_SLOPE_TOL = 0.05
DYADIC_FULL = tuple(range(4, 13))    # rho = 2^4 .. 2^12
DYADIC_SCAN = tuple(range(4, 9))     # rho = 2^4 .. 2^8 for direction scans


@dataclass(frozen=True)
class DecayFit:
    """Least-squares power-law fit of |value| against rho on log2 axes.

    Samples below the quadrature floor (1e-13 * mass) are excluded from the
    fit and flagged through ``floor_hit``; with the floor hit the slope is an
    upper bound marker for the decay, not an estimate.
    """

    samples: tuple[tuple[float, float], ...]
    slope: float
    intercept: float
    max_residual: float
    floor_hit: bool
    n_used: int

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept,
                "max_residual": self.max_residual, "floor_hit": self.floor_hit,
                "n_used": self.n_used}


def fit_decay(samples, mass: float = 1.0) -> DecayFit:
    """Fit log2|value| = slope * log2(rho) + intercept.

    ``samples`` is a sequence of (rho, value) with strictly increasing rho and
    at least 5 entries.  Raises AllFloored when fewer than two samples sit
    above the noise floor.
    """
    rhos = np.array([float(r) for r, _ in samples])
    vals = np.array([abs(v) for _, v in samples])
    if rhos.size < 5:
        raise ValueError("need at least 5 samples for a decay fit")
    if np.any(np.diff(rhos) <= 0):
        raise ValueError("rho values must be strictly increasing")
    floor = FLOOR_FACTOR * mass
    keep = vals > floor
    if np.sum(keep) < 2:
        raise AllFloored("all decay samples below the quadrature floor")
    x = np.log2(rhos[keep])
    y = np.log2(vals[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.max(np.abs(y - (slope * x + intercept))))
    return DecayFit(samples=tuple(zip(x.tolist(), y.tolist())),
                    slope=float(slope), intercept=float(intercept),
                    max_residual=resid, floor_hit=bool(np.any(~keep)),
                    n_used=int(np.sum(keep)))


@dataclass(frozen=True)
class SampleRow:
    rho: float
    direction: tuple[float, ...]
    value: complex
    error_estimate: float


def decay_samples(measure, direction, rho_exponents=DYADIC_FULL,
                  tol: float = 1e-8) -> list[SampleRow]:
    """Transform samples along a fixed unit direction at dyadic rho."""
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    rows = []
    for k in rho_exponents:
        rho = float(2 ** k)
        res = fourier_full(measure, rho * direction, tol)
        rows.append(SampleRow(rho=rho, direction=tuple(direction.tolist()),
                              value=res.value, error_estimate=res.error_estimate))
    return rows


def write_samples_csv(path, rows: list[SampleRow]) -> None:
    """CSV columns: rho, direction components, re, im, abs, quadrature_error_estimate."""
    if not rows:
        raise ValueError("no sample rows to write")
    dim = len(rows[0].direction)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["rho"] + [f"dir_{i}" for i in range(dim)]
                   + ["re", "im", "abs", "quadrature_error_estimate"])
        for r in rows:
            w.writerow([f"{r.rho:.17g}"] + [f"{d:.17g}" for d in r.direction]
                       + [f"{r.value.real:.17g}", f"{r.value.imag:.17g}",
                          f"{abs(r.value):.17g}", f"{r.error_estimate:.17g}"])


# ---------------------------------------------------------------------------
# direction grids
# ---------------------------------------------------------------------------

def fibonacci_sphere(n: int) -> np.ndarray:
    """Quasi-uniform points on S^2 by the golden-angle spiral."""
    i = np.arange(n)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(1.0 - z * z)
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def scan_directions(ambient_dim: int, n: int, seed: int = 7) -> np.ndarray:
    """Direction grid for scans; always includes the last coordinate axis.

    S^2 uses the Fibonacci spiral; other dimensions use seeded isotropic
    directions so scans stay reproducible.
    """
    if ambient_dim == 3:
        pts = fibonacci_sphere(n)
    else:
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(n, ambient_dim))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pole = np.zeros(ambient_dim)
    pole[-1] = 1.0
    return np.concatenate([pts, pole[None, :]], axis=0)


@dataclass(frozen=True)
class DirectionScan:
    entries: tuple[tuple[tuple[float, ...], DecayFit | None], ...]
    summary_slope: float
    floored_directions: int

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            dim = len(self.entries[0][0])
            w.writerow([f"dir_{i}" for i in range(dim)]
                       + ["slope", "intercept", "max_residual", "floor_hit", "n_used"])
            for direction, fit in self.entries:
                row = [f"{d:.17g}" for d in direction]
                if fit is None:
                    row += ["", "", "", "all_floored", "0"]
                else:
                    row += [f"{fit.slope:.17g}", f"{fit.intercept:.17g}",
                            f"{fit.max_residual:.17g}", str(fit.floor_hit),
                            str(fit.n_used)]
                w.writerow(row)


def direction_scan(measure, n_directions: int = 64,
                   rho_exponents=DYADIC_SCAN, tol: float = 1e-8,
                   seed: int = 7) -> DirectionScan:
    """Per-direction decay fits over a sphere grid (plus the last axis).

    Directions whose samples all drown in the quadrature floor are reported
    with fit None; the summary slope is the maximum (slowest decay) over the
    fitted directions, an upper bound on the usable decay exponent.
    """
    if n_directions < 16:
        raise ValueError("need at least 16 directions")
    dirs = scan_directions(measure.ambient_dim, n_directions, seed=seed)
    rhos = np.array([2.0 ** k for k in rho_exponents])
    xis = (rhos[:, None, None] * dirs[None, :, :]).reshape(-1, dirs.shape[1])
    values = fourier_batch(measure, xis, tol=tol).reshape(rhos.size, dirs.shape[0])
    entries = []
    floored = 0
    slopes = []
    for j in range(dirs.shape[0]):
        pairs = list(zip(rhos.tolist(), values[:, j]))
        try:
            fit = fit_decay(pairs, mass=measure.mass)
            slopes.append(fit.slope)
        except AllFloored:
            fit = None
            floored += 1
        entries.append((tuple(dirs[j].tolist()), fit))
    if not slopes:
        raise AllFloored("every direction fell below the quadrature floor")
    return DirectionScan(entries=tuple(entries),
                         summary_slope=float(max(slopes)),
                         floored_directions=floored)


# ---------------------------------------------------------------------------
# dimension certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DimensionCertificate:
    """Numerical certificate bracketing the decay exponent of a catalog surface.

    ``nu_slope`` fits the averaged-measure transform along the anchor axis
    (or the base transform itself for flat / full-rank surfaces, where the
    averaging construction degenerates).  ``passed`` requires the fitted slope
    to sit within ``slope_tol`` of -rank/2, the direction-scan summary slope
    (slowest decay of the base measure) to reach -rank/2 + slope_tol, and the
    transfer inequality to hold at every sampled rho.
    """

    surface: str
    rank: int
    expected_fourier_dim: int
    mode: str
    upper_direction: tuple[float, ...]
    nu_slope: DecayFit
    nu_samples: tuple[SampleRow, ...]
    mu_slowest_slope: float
    transfer_max_violation: float | None
    slope_tol: float
    rho_exponents: tuple[int, ...]
    dim_estimate: float
    passed: bool
    runtime_ms: float

    def to_dict(self) -> dict:
        return {
            "schema": "1",
            "surface": self.surface,
            "k": self.rank,
            "expected_fourier_dim": self.expected_fourier_dim,
            "mode": self.mode,
            "upper_direction": list(self.upper_direction),
            "nu_slope": self.nu_slope.to_dict(),
            "nu_samples": [[r.rho, r.value.real, r.value.imag, abs(r.value),
                            r.error_estimate] for r in self.nu_samples],
            "mu_slopes": {"slowest": self.mu_slowest_slope},
            "transfer_max_violation": self.transfer_max_violation,
            "tolerances": {"slope_tol": self.slope_tol},
            "rho_exponents": list(self.rho_exponents),
            "dim_estimate": self.dim_estimate,
            "verdict": "pass" if self.passed else "fail",
            "runtime_ms": self.runtime_ms,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _verify_rank(entry: CatalogEntry, n_points: int = 100, seed: int = 11) -> None:
    rng = np.random.default_rng(seed)
    pts = entry.chart.domain.sample(n_points, rng)
    for p in pts:
        r = rank_at(entry.chart, p)
        if r != entry.expected_rank:
            raise RankMismatch(
                f"{entry.name}: rank {r} at {p.tolist()} != annotation {entry.expected_rank}")


def certificate(entry: CatalogEntry, rho_exponents=DYADIC_FULL,
                slope_tol: float = DEFAULT_SLOPE_TOL,
                scan_directions_n: int = 64, scan_rho_exponents=DYADIC_SCAN,
                outer_tol: float = 1e-4,
                transfer_shift_samples: int = 17) -> DimensionCertificate:
    """Run the decay-bracket pipeline for one catalog surface."""
    t0 = time.perf_counter()
    _verify_rank(entry)
    chart = entry.chart
    k = entry.expected_rank
    d = chart.param_dim
    measure = default_measure(chart)
    pole = np.zeros(chart.ambient_dim)
    pole[-1] = 1.0

    averaged = entry.supports_averaging and isinstance(chart, RuledChart) and 0 < k < d
    transfer_violation = None
    if averaged:
        mode = "averaged"
        nu = AveragedMeasure(measure)
        rows = []
        transfer_violation = 0.0
        sgrid = nu.weight_domain.grid(transfer_shift_samples)
        normals = np.stack([chart.normal_on_base(s) for s in sgrid])
        for kk in rho_exponents:
            rho = float(2 ** kk)
            res = averaged_fourier_full(nu, rho, tol=outer_tol)
            rows.append(SampleRow(rho=rho, direction=tuple(pole.tolist()),
                                  value=res.value, error_estimate=res.error_estimate))
            mus = np.abs(fourier_batch(measure, rho * normals))
            bound = nu.weight_mass * float(np.max(mus))
            gap = (abs(res.value) - bound) / max(bound, 1e-300)
            transfer_violation = max(transfer_violation, float(gap))
        direction = pole
    else:
        # flat (k = 0) and full-rank surfaces: the averaging construction is
        # degenerate or unnecessary; certify the base transform along the
        # normal axis directly
        mode = "flat" if k == 0 else "full-rank"
        direction = pole if not isinstance(chart, RuledChart) else pole
        rows = decay_samples(measure, direction, rho_exponents)

    fit = fit_decay([(r.rho, r.value) for r in rows], mass=measure.mass)
    scan = direction_scan(measure, n_directions=scan_directions_n,
                          rho_exponents=scan_rho_exponents)
    target = -0.5 * k
    passed = (abs(fit.slope - target) <= slope_tol
              and scan.summary_slope <= target + slope_tol
              and (transfer_violation is None or transfer_violation <= 1e-9))
    return DimensionCertificate(
        surface=entry.name,
        rank=k,
        expected_fourier_dim=entry.expected_fourier_dim,
        mode=mode,
        upper_direction=tuple(direction.tolist()),
        nu_slope=fit,
        nu_samples=tuple(rows),
        mu_slowest_slope=scan.summary_slope,
        transfer_max_violation=transfer_violation,
        slope_tol=slope_tol,
        rho_exponents=tuple(rho_exponents),
        dim_estimate=2.0 * abs(fit.slope),
        passed=passed,
        runtime_ms=1000.0 * (time.perf_counter() - t0),
    )


# ---------------------------------------------------------------------------
# Cartesian product rule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProductRuleReport:
    factorization_max_rel: float
    axis_slope_first: float
    axis_slope_second: float
    first_factor_slope: float
    second_factor_slope: float
    summary_slope: float
    expected_summary: float

    def to_dict(self) -> dict:
        return {
            "schema": "1",
            "factorization_max_rel": self.factorization_max_rel,
            "axis_slope_first": self.axis_slope_first,
            "axis_slope_second": self.axis_slope_second,
            "first_factor_slope": self.first_factor_slope,
            "second_factor_slope": self.second_factor_slope,
            "summary_slope": self.summary_slope,
            "expected_summary": self.expected_summary,
        }


def product_rule_check(m1: SurfaceMeasure, m2: SurfaceMeasure,
                       n_directions: int = 64, rho_exponents=DYADIC_SCAN,
                       n_factorization: int = 50, seed: int = 13,
                       tol: float = 1e-10) -> ProductRuleReport:
    """Verify the Cartesian-product behavior of transforms and decay slopes.

    (i) the product transform factorizes into the factor transforms;
    (ii) along (xi_1, 0) the product reduces to the first factor times the
    second mass, so slopes match the factor slope; (iii) the direction-scan
    summary slope of the product equals the slower of the factor summaries
    (the minimum-dimension rule).
    """
    from .measure import product_measure
    prod = product_measure(m1, m2)
    n1 = m1.ambient_dim

    rng = np.random.default_rng(seed)
    max_rel = 0.0
    for _ in range(n_factorization):
        eta = rng.normal(size=prod.ambient_dim)
        eta /= np.linalg.norm(eta)
        rho = float(np.exp(rng.uniform(np.log(1.0), np.log(64.0))))
        xi = rho * eta
        joint = fourier_full(prod, xi, tol).value
        split = (fourier_full(m1, xi[:n1], tol).value
                 * fourier_full(m2, xi[n1:], tol).value)
        rel = abs(joint - split) / max(abs(split), FLOOR_FACTOR * prod.mass)
        max_rel = max(max_rel, float(rel))

    def best_direction(m):
        chart = m.chart
        center = chart.domain.center
        return unit_normal(chart, center)

    d1 = best_direction(m1)
    d2 = best_direction(m2)
    fit1 = fit_decay([(r.rho, r.value) for r in decay_samples(m1, d1, rho_exponents)],
                     mass=m1.mass)
    fit2 = fit_decay([(r.rho, r.value) for r in decay_samples(m2, d2, rho_exponents)],
                     mass=m2.mass)
    axis1 = decay_samples(prod, np.concatenate([d1, np.zeros(prod.ambient_dim - n1)]),
                          rho_exponents)
    axis2 = decay_samples(prod, np.concatenate([np.zeros(n1), d2]), rho_exponents)
    fit_axis1 = fit_decay([(r.rho, r.value) for r in axis1], mass=prod.mass)
    fit_axis2 = fit_decay([(r.rho, r.value) for r in axis2], mass=prod.mass)

    scan = direction_scan(prod, n_directions=n_directions,
                          rho_exponents=rho_exponents, seed=seed)
    return ProductRuleReport(
        factorization_max_rel=max_rel,
        axis_slope_first=fit_axis1.slope,
        axis_slope_second=fit_axis2.slope,
        first_factor_slope=fit1.slope,
        second_factor_slope=fit2.slope,
        summary_slope=scan.summary_slope,
        expected_summary=max(fit1.slope, fit2.slope),
    )
