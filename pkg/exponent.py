"""Poincare series, displacement-length series and critical exponent estimation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import optimize, stats

from errors import DomainError, FitError, HypothesisViolationError, InsufficientDataError
from hypgeo import HalfSpacePoint, orbit_distances
from kleinian import ORBIT_TOL, OrbitCache

logger = logging.getLogger(__name__)

SLOPE = "slope"
BISECTION = "bisection"

CONVERGENT = "convergent"
DIVERGENT = "divergent"
UNDETERMINED = "undetermined"

# Upper end of the bisection bracket: delta < 2 on H^3.
S_BRACKET_MAX = 2.0


@dataclass(frozen=True)
class SeriesValue:
    """Truncated series at exponent s with a geometric tail extrapolation (None when divergent)."""

    s: float
    partial_sum: float
    terms_used: int
    tail_estimate: Optional[float]
    radius: float
    growth_rate: float

    @property
    def divergent(self) -> bool:
        return self.tail_estimate is None

    @property
    def total(self) -> float:
        return math.inf if self.tail_estimate is None else self.partial_sum + self.tail_estimate


@dataclass(frozen=True)
class ExponentEstimate:
    delta_hat: float
    method: str
    confidence: float
    radius: float
    n: int
    points_used: int
    residual_rms: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.delta_hat < self.n:
            raise DomainError(f"delta_hat={self.delta_hat} outside [0, {self.n})")

    @property
    def upper(self) -> float:
        return self.delta_hat + self.confidence

    def as_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "delta_hat": self.delta_hat,
            "confidence": self.confidence,
            "upper": self.upper,
            "radius": self.radius,
            "n": self.n,
            "points_used": self.points_used,
            "residual_rms": self.residual_rms,
        }


def _check_s(s: float) -> None:
    if not (isinstance(s, (int, float)) and math.isfinite(s)) or s <= 0:
        raise DomainError(f"series exponent s must be positive (got {s!r})")


def _shell_index(cache: OrbitCache, width: float) -> np.ndarray:
    """Shell k holds (k-1)w < d(o, g o) <= k w; the identity sits in shell 0."""
    return np.maximum(np.ceil((cache.orbit_distance - ORBIT_TOL) / width), 0).astype(np.int64)


def _shell_sums(cache: OrbitCache, weights: np.ndarray, width: float) -> np.ndarray:
    n_shells = int(math.floor(cache.radius / width + ORBIT_TOL)) + 1
    return np.bincount(_shell_index(cache, width), weights=weights, minlength=n_shells)[:n_shells]


def _outer_shells(shell_sums: np.ndarray, fit_fraction: float) -> Tuple[np.ndarray, np.ndarray]:
    k = np.arange(shell_sums.size)
    start = max(1, int(math.ceil((shell_sums.size - 1) * (1.0 - fit_fraction))))
    keep = (k >= start) & (shell_sums > 0)
    return k[keep].astype(float), shell_sums[keep]


def _fit_line(x: np.ndarray, y: np.ndarray) -> Tuple[float, float, float]:
    """Least-squares slope, its standard error and the residual RMS."""
    if x.size < 2 or np.ptp(x) == 0:
        raise FitError("need at least two distinct abscissae for a slope")
    if x.size >= 4:
        coeffs, cov = np.polyfit(x, y, 1, cov=True)
        stderr = float(math.sqrt(max(cov[0, 0], 0.0)))
    else:
        coeffs = np.polyfit(x, y, 1)
        stderr = 0.0
    residuals = y - np.polyval(coeffs, x)
    return float(coeffs[0]), stderr, float(np.sqrt(np.mean(residuals ** 2)))


def _tail(
    shell_sums: np.ndarray,
    s: float,
    delta_hat: Optional[float],
    fit_fraction: float,
    finite_group: bool,
) -> Tuple[Optional[float], float]:
    """
    Geometric extrapolation beyond the outermost shell.

    The ratio per unit shell is e^{-(s - delta_hat)} when delta_hat is given, otherwise the
    fitted growth of the log shell sums. The extrapolation starts from the larger of the last
    shell and the second-to-last shell advanced by one ratio.
    """
    if finite_group:
        return 0.0, -math.inf
    if delta_hat is not None:
        rate = delta_hat - s
    else:
        k, sums = _outer_shells(shell_sums, fit_fraction)
        if k.size < 2:
            k, sums = _outer_shells(shell_sums, 1.0)
        if k.size < 2:
            logger.warning("too few nonempty shells to extrapolate the series at s=%.3f", s)
            return None, math.nan
        rate, _, _ = _fit_line(k, np.log(sums))
    if rate >= 0:
        return None, rate
    ratio = math.exp(rate)
    last = float(shell_sums[-1])
    previous = float(shell_sums[-2]) if shell_sums.size >= 2 else 0.0
    base = max(last, previous * ratio)
    return base * ratio / (1.0 - ratio), rate


def _series(
    cache: OrbitCache,
    s: float,
    distances: np.ndarray,
    include: np.ndarray,
    delta_hat: Optional[float],
    fit_fraction: float,
    shell_width: float,
) -> SeriesValue:
    terms = np.where(include, np.exp(-s * distances), 0.0)
    # Terms are in cache order (increasing orbit distance); fsum fixes the rounding.
    partial = math.fsum(terms)
    shells = _shell_sums(cache, terms, shell_width)
    tail, rate = _tail(shells, s, delta_hat, fit_fraction, finite_group=cache.group.rank == 0)
    return SeriesValue(
        s=float(s),
        partial_sum=partial,
        terms_used=int(np.count_nonzero(include)),
        tail_estimate=tail,
        radius=cache.radius,
        growth_rate=rate,
    )


def poincare_partial(
    cache: OrbitCache,
    s: float,
    x: HalfSpacePoint,
    y: HalfSpacePoint,
    delta_hat: Optional[float] = None,
    fit_fraction: float = 0.5,
    shell_width: float = 1.0,
) -> SeriesValue:
    """G_s(x, y) = sum of e^{-s d(x, g y)} over the cache, with a tail extrapolation."""
    _check_s(s)
    distances = orbit_distances(cache.matrices, x, y)
    return _series(cache, s, distances, np.ones(len(cache), dtype=bool), delta_hat, fit_fraction, shell_width)


def displacement_series(
    cache: OrbitCache,
    s: float,
    delta_hat: Optional[float] = None,
    fit_fraction: float = 0.5,
    shell_width: float = 1.0,
) -> SeriesValue:
    """Sum of e^{-s l_g} over non-identity cache elements."""
    _check_s(s)
    return _series(cache, s, cache.displacement, cache.non_identity, delta_hat, fit_fraction, shell_width)


def _require_radius(cache: OrbitCache, min_radius: float) -> None:
    if cache.radius < min_radius:
        raise InsufficientDataError(
            f"delta estimation needs a cache radius >= {min_radius} (got {cache.radius})"
        )
    if not cache.complete:
        logger.warning("estimating delta on an incomplete cache of %s", cache.group.name)


def _half_width(stderr: float, points: int, confidence: float) -> float:
    dof = max(points - 2, 1)
    return float(stats.t.ppf(0.5 + confidence / 2.0, dof) * stderr)


def _clamp(delta: float, n: int) -> float:
    if delta >= n:
        logger.warning("fitted growth %.4f exceeds the dimension bound %d; clamping", delta, n)
        return math.nextafter(float(n), 0.0)
    return max(delta, 0.0)


def _slope_estimate(
    cache: OrbitCache, fit_fraction: float, shell_width: float, confidence: float
) -> ExponentEstimate:
    step = shell_width / 4.0
    start = cache.radius * (1.0 - fit_fraction)
    radii = np.arange(start, cache.radius + ORBIT_TOL, step)
    counts = np.searchsorted(cache.orbit_distance, radii + ORBIT_TOL, side="right")
    if radii.size < 4:
        raise InsufficientDataError("too few radii in the fitted range for the slope method")
    slope, stderr, rms = _fit_line(radii, np.log(counts.astype(float)))
    n = cache.group.dimension_n
    return ExponentEstimate(
        delta_hat=_clamp(slope, n),
        method=SLOPE,
        confidence=_half_width(stderr, radii.size, confidence),
        radius=cache.radius,
        n=n,
        points_used=int(radii.size),
        residual_rms=rms,
    )


def _bisection_estimate(
    cache: OrbitCache, fit_fraction: float, shell_width: float, confidence: float
) -> ExponentEstimate:
    def shell_growth(s: float) -> Tuple[float, float, float, int]:
        shells = _shell_sums(cache, np.exp(-s * cache.orbit_distance), shell_width)
        k, sums = _outer_shells(shells, fit_fraction)
        if k.size < 4:
            raise InsufficientDataError(
                f"only {k.size} nonempty outer shells; the bisection method needs 4"
            )
        slope, stderr, rms = _fit_line(k * shell_width, np.log(sums))
        return slope, stderr, rms, int(k.size)

    n = cache.group.dimension_n
    at_zero = shell_growth(0.0)[0]
    if at_zero <= 0.0:
        root = 0.0
    else:
        root = float(optimize.bisect(lambda s: shell_growth(s)[0], 0.0, S_BRACKET_MAX, xtol=1e-8))
    _, stderr, rms, points = shell_growth(root)
    return ExponentEstimate(
        delta_hat=_clamp(root, n),
        method=BISECTION,
        confidence=_half_width(stderr, points, confidence),
        radius=cache.radius,
        n=n,
        points_used=points,
        residual_rms=rms,
    )


def estimate_delta(
    cache: OrbitCache,
    method: str = SLOPE,
    min_radius: float = 8.0,
    fit_fraction: float = 0.5,
    shell_width: float = 1.0,
    confidence: float = 0.95,
) -> ExponentEstimate:
    """
    Estimate the critical exponent from orbit growth.

    slope: least-squares slope of log #{g : d(o, g o) <= R} in R over the outer part of the
    certified range. bisection: the s at which the fitted growth of log shell sums
    sum_{shell} e^{-s d(o, g o)} changes sign. Half-widths come from the fit's standard error.
    """
    _require_radius(cache, min_radius)
    if cache.group.rank == 0:
        raise InsufficientDataError("the trivial group has no orbit growth to fit")
    if method == SLOPE:
        estimate = _slope_estimate(cache, fit_fraction, shell_width, confidence)
    elif method == BISECTION:
        estimate = _bisection_estimate(cache, fit_fraction, shell_width, confidence)
    else:
        raise DomainError(f"unknown delta method {method!r}")
    logger.info(
        "%s delta (%s, T=%.1f): %.4f +- %.4f",
        cache.group.name, method, cache.radius, estimate.delta_hat, estimate.confidence,
    )
    return estimate


def gate(estimate: ExponentEstimate, n: int = 2) -> None:
    """Refuse to proceed unless delta_hat + confidence < n/2."""
    if estimate.upper >= n / 2.0:
        raise HypothesisViolationError(
            f"critical exponent gate failed: delta_hat + CI = {estimate.upper:.4f} >= n/2 = {n / 2.0}",
            diagnostics=estimate.as_dict(),
        )


def default_s(estimate: ExponentEstimate, n: int = 2) -> float:
    """Midpoint of (delta_hat + CI, n/2)."""
    gate(estimate, n)
    return 0.5 * (estimate.upper + n / 2.0)


def classify_regime(s: float, delta_hat: float, margin: float = 0.1) -> str:
    if s > delta_hat + margin:
        return CONVERGENT
    if s < delta_hat - margin:
        return DIVERGENT
    return UNDETERMINED


def partial_sum_growth(
    cache: OrbitCache,
    s: float,
    x: HalfSpacePoint,
    y: HalfSpacePoint,
    fit_fraction: float = 0.5,
    shell_width: float = 1.0,
) -> float:
    """Fitted exponential growth rate in T of G_s(x, y) partial sums, read off their per-shell increments."""
    _check_s(s)
    terms = np.exp(-s * orbit_distances(cache.matrices, x, y))
    k, sums = _outer_shells(_shell_sums(cache, terms, shell_width), fit_fraction)
    slope, _, _ = _fit_line(k * shell_width, np.log(sums))
    return slope


def conjugation_bound_check(
    cache: OrbitCache, s: float, x: HalfSpacePoint, y: HalfSpacePoint
) -> Dict[str, float]:
    """e^{-s d(x,y)} G_s(y,y) <= G_s(x,y) <= e^{s d(x,y)} G_s(y,y) on the same set of elements."""
    _check_s(s)
    d_xy = float(orbit_distances(np.eye(2, dtype=np.complex128)[np.newaxis], x, y)[0])
    g_xy = math.fsum(np.exp(-s * orbit_distances(cache.matrices, x, y)))
    g_yy = math.fsum(np.exp(-s * orbit_distances(cache.matrices, y, y)))
    lower = math.exp(-s * d_xy) * g_yy
    upper = math.exp(s * d_xy) * g_yy
    slack = 1e-12 * max(upper, 1.0)
    return {
        "s": float(s),
        "pair_distance": d_xy,
        "lower": lower,
        "value": g_xy,
        "upper": upper,
        "holds": bool(lower - slack <= g_xy <= upper + slack),
    }


def series_table(
    cache: OrbitCache,
    s_grid: Sequence[float],
    x: HalfSpacePoint,
    y: HalfSpacePoint,
    delta_hat: Optional[float] = None,
    margin: float = 0.1,
) -> pd.DataFrame:
    """Rows (s, partial_sum, tail, regime) for the Poincare and displacement series."""
    rows: List[Dict[str, object]] = []
    for s in s_grid:
        poincare = poincare_partial(cache, s, x, y)
        census = displacement_series(cache, s)
        rows.append(
            {
                "s": float(s),
                "partial_sum": poincare.partial_sum,
                "tail_estimate": poincare.tail_estimate,
                "divergent": poincare.divergent,
                "growth_rate": poincare.growth_rate,
                "displacement_partial_sum": census.partial_sum,
                "displacement_tail_estimate": census.tail_estimate,
                "terms_used": poincare.terms_used,
                "radius": cache.radius,
                "regime": classify_regime(s, delta_hat, margin) if delta_hat is not None else "",
            }
        )
    return pd.DataFrame(rows)
