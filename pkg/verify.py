"""Bound-verification harness: model-space sweeps, automorphic hypothesis checks and negative controls."""

from __future__ import annotations

import json
import logging
import math
import multiprocessing as mp
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import qmc

from errors import DomainError, FitError, HypothesisViolationError, InsufficientDataError
from exponent import ExponentEstimate, gate
from hypgeo import (
    BallPoint,
    HalfSpacePoint,
    apply,
    ball_from_halfspace,
    halfspace_from_ball,
    inverse,
    isometry_to,
    orbit_distances,
)
from images import (
    CASE_I,
    DIMENSION_N,
    DirichletReduction,
    automorphic_kernel,
    euclidean_cylinder_sum,
    reduce_to_dirichlet,
    resolve_s,
)
from kleinian import GroupPresentation, OrbitCache, shortest_displacement
from specmeas import (
    KernelQuery,
    bound_h3_grid,
    euclidean_envelope,
    hypothesis_orders,
    kernel_h3_amplitude,
    kernel_h3_grid,
)

logger = logging.getLogger(__name__)

ARTIFACT_VERSION = "1.0.0"
# Dimension m = n + 1 of H^3.
MANIFOLD_DIMENSION = DIMENSION_N + 1
MAX_PAIR_BATCHES = 10


@dataclass(frozen=True)
class GrowthFit:
    slope: float
    intercept: float
    residual_rms: float
    points: int


@dataclass
class BoundCheckReport:
    """
    Sweep of |kernel| / envelope ratios.

    `constants` holds the sup ratio and `slopes` the fitted log-lambda slope of the best constant
    on [lambda_min, lambda] (high-energy half of the grid), both keyed by series label ("j0",
    "ext_j1", ...). The report passes iff every ratio is finite and every slope is <= slope_tol.
    """

    check: str
    group: str
    j_set: Tuple[int, ...]
    lambdas: List[float]
    cells: pd.DataFrame
    constants: Dict[str, float]
    slopes: Dict[str, float]
    slope_tol: float
    pairs: List[Dict[str, Any]] = field(default_factory=list)
    seed: Optional[int] = None
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def all_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.cells["ratio"].to_numpy(dtype=float))))

    @property
    def passed(self) -> bool:
        return self.all_finite and all(slope <= self.slope_tol for slope in self.slopes.values())

    def as_dict(self) -> Dict[str, Any]:
        return {
            "check": self.check,
            "group": self.group,
            "status": "PASS" if self.passed else "FAIL",
            "passed": self.passed,
            "j_set": list(self.j_set),
            "lambdas": list(self.lambdas),
            "constants": self.constants,
            "slopes": self.slopes,
            "slope_tol": self.slope_tol,
            "all_finite": self.all_finite,
            "pairs": self.pairs,
            "seed": self.seed,
            "details": self.details,
            "cells": len(self.cells),
        }


@dataclass
class CheckReport:
    """Outcome of a non-sweep check with its metrics and optional per-row table."""

    check: str
    group: str
    passed: bool
    metrics: Dict[str, Any]
    rows: Optional[pd.DataFrame] = None
    label: Optional[str] = None

    def as_dict(self) -> Dict[str, Any]:
        return {
            "check": self.check,
            "group": self.group,
            "status": self.label or ("PASS" if self.passed else "FAIL"),
            "passed": self.passed,
            "metrics": self.metrics,
            "rows": 0 if self.rows is None else len(self.rows),
        }

    @property
    def cells(self) -> pd.DataFrame:
        return self.rows if self.rows is not None else pd.DataFrame()


def fit_growth_exponent(t: Sequence[float], v: Sequence[float]) -> GrowthFit:
    """Least-squares slope of log v against log t."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    if t.shape != v.shape:
        raise DomainError("t and v must have the same length")
    if t.size < 3:
        raise InsufficientDataError(f"growth fit needs at least 3 points (got {t.size})")
    if np.any(t <= 0) or np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise DomainError("growth fit needs positive finite values")
    x, y = np.log(t), np.log(v)
    if np.ptp(x) == 0:
        raise FitError("growth fit abscissae are all equal")
    slope, intercept = np.polyfit(x, y, 1)
    residuals = y - (slope * x + intercept)
    return GrowthFit(float(slope), float(intercept), float(np.sqrt(np.mean(residuals ** 2))), int(t.size))


def log_lambda_grid(lambda_min: float, lambda_max: float, points: int) -> np.ndarray:
    if points == 1:
        return np.array([float(lambda_min)])
    return np.geomspace(lambda_min, lambda_max, points)


def _sup_slopes(cells: pd.DataFrame, series_col: str = "series") -> Tuple[Dict[str, float], Dict[str, float], List[str]]:
    """
    Per series: the fitted constant (sup ratio) and the growth of the best constant in lambda.

    The best constant on [lambda_min, L] is the running sup of the per-lambda sup ratio; its
    log-log slope is fitted over the upper half (in log lambda) of the grid, where the
    low-energy ramp of a bounded ratio has settled.
    """
    constants: Dict[str, float] = {}
    slopes: Dict[str, float] = {}
    notes: List[str] = []
    for label, frame in cells.groupby(series_col, sort=True):
        sup = frame.groupby("lambda")["ratio"].max().sort_index()
        constants[str(label)] = float(sup.max())
        running = sup.cummax()
        midpoint = math.sqrt(float(running.index.min()) * float(running.index.max()))
        upper = running[running.index >= midpoint * (1.0 - 1e-12)]
        positive = upper[(upper > 0) & np.isfinite(upper)]
        if len(positive) < 3:
            slopes[str(label)] = 0.0
            notes.append(f"{label}: slope not fitted ({len(positive)} lambda values in the upper half)")
            continue
        slopes[str(label)] = fit_growth_exponent(positive.index.to_numpy(), positive.to_numpy()).slope
    return constants, slopes, notes


def _map_lambdas(worker, lambdas: Sequence[float], threads: int) -> List[Any]:
    """Run worker(lam) for every lambda; results come back in lambda order."""
    if threads > 1 and len(lambdas) > 1:
        with mp.Pool(processes=min(threads, len(lambdas))) as pool:
            return pool.map(worker, list(lambdas))
    return [worker(lam) for lam in lambdas]


def check_model_bounds(
    l0: float,
    lambdas: Sequence[float],
    radii: Sequence[float],
    j_set: Sequence[int] = (0, 1, 2),
    slope_tol: float = 0.05,
    cutoff: Optional[float] = None,
) -> BoundCheckReport:
    """Ratios |d^j K| / bound_h3 on the (lambda, r) grid for each j."""
    lam = np.asarray(lambdas, dtype=float)
    r = np.asarray(radii, dtype=float)
    if lam.size == 0 or r.size == 0:
        raise DomainError("model-bound grids must be nonempty")
    lam_grid, r_grid = np.meshgrid(lam, r, indexing="ij")
    frames = []
    for j in j_set:
        values = kernel_h3_grid(lam_grid, r_grid, j)
        envelope = bound_h3_grid(lam_grid, r_grid, j, l0, cutoff)
        frames.append(
            pd.DataFrame(
                {
                    "series": f"j{j}",
                    "lambda": lam_grid.ravel(),
                    "d": r_grid.ravel(),
                    "j": j,
                    "value": values.ravel(),
                    "envelope": envelope.ravel(),
                    "ratio": np.abs(values.ravel()) / envelope.ravel(),
                }
            )
        )
    cells = pd.concat(frames, ignore_index=True)
    constants, slopes, notes = _sup_slopes(cells)
    report = BoundCheckReport(
        check="model_bounds",
        group="H3",
        j_set=tuple(int(j) for j in j_set),
        lambdas=[float(v) for v in lam],
        cells=cells,
        constants=constants,
        slopes=slopes,
        slope_tol=slope_tol,
        details={"l0": l0, "cutoff": l0 / 2.0 if cutoff is None else cutoff, "notes": notes},
    )
    logger.info("model bounds l0=%.3g: %s (slopes %s)", l0, "PASS" if report.passed else "FAIL", slopes)
    return report


def check_derivatives(
    lambdas: Sequence[float],
    radii: Sequence[float],
    j_set: Sequence[int] = (1, 2),
    step: float = 1e-5,
    rel_tol: float = 1e-6,
) -> CheckReport:
    """
    Central differences of d^{j-1} K against the closed-form d^j K.

    Errors are relative to max(|exact|, 1e-2 * amplitude) so zeros of the oscillation do not
    inflate them.
    """
    lam_grid, r_grid = np.meshgrid(np.asarray(lambdas, dtype=float), np.asarray(radii, dtype=float), indexing="ij")
    frames = []
    for j in j_set:
        if j < 1:
            raise DomainError("finite-difference checks need j >= 1")
        exact = kernel_h3_grid(lam_grid, r_grid, j)
        fd = (kernel_h3_grid(lam_grid + step, r_grid, j - 1) - kernel_h3_grid(lam_grid - step, r_grid, j - 1)) / (
            2.0 * step
        )
        scale = np.maximum(np.abs(exact), 1e-2 * kernel_h3_amplitude(lam_grid, r_grid, j))
        frames.append(
            pd.DataFrame(
                {
                    "lambda": lam_grid.ravel(),
                    "d": r_grid.ravel(),
                    "j": j,
                    "exact": exact.ravel(),
                    "finite_difference": fd.ravel(),
                    "rel_error": (np.abs(fd - exact) / scale).ravel(),
                }
            )
        )
    rows = pd.concat(frames, ignore_index=True)
    worst = rows.groupby("j")["rel_error"].max()
    passed = bool(np.all(np.isfinite(rows["rel_error"])) and worst.max() <= rel_tol)
    return CheckReport(
        check="derivatives",
        group="H3",
        passed=passed,
        metrics={
            "max_rel_error": {f"j{int(j)}": float(v) for j, v in worst.items()},
            "rel_tol": rel_tol,
            "step": step,
        },
        rows=rows,
    )


def sample_pairs(
    group: GroupPresentation,
    cache: OrbitCache,
    count: int,
    d_min: float,
    d_max: float,
    seed: int,
) -> List[DirichletReduction]:
    """
    Deterministic pairs (o, y) with y placed by a scrambled Halton sequence.

    y sits at distance d in [d_min, d_max] from the basepoint o in a Halton direction, then is
    Dirichlet-reduced against o. Pairs whose reduced distance falls below d_min are replaced.
    """
    if count < 1:
        raise DomainError("pair count must be >= 1")
    if not 0 < d_min <= d_max:
        raise DomainError(f"need 0 < d_min <= d_max (got {d_min}, {d_max})")
    o = group.basepoint
    to_basepoint = isometry_to(o)
    sampler = qmc.Halton(d=3, scramble=True, seed=seed)
    pairs: List[DirichletReduction] = []
    for _ in range(MAX_PAIR_BATCHES):
        for u_radius, u_height, u_angle in sampler.random(count):
            d = d_min + u_radius * (d_max - d_min)
            w = 2.0 * u_height - 1.0
            rho = math.sqrt(max(0.0, 1.0 - w * w))
            angle = 2.0 * math.pi * u_angle
            norm = math.tanh(d / 2.0)
            ball = BallPoint((norm * rho * math.cos(angle), norm * rho * math.sin(angle), norm * w))
            y = apply(to_basepoint, halfspace_from_ball(ball))
            reduced = reduce_to_dirichlet(group, cache, o, y)
            if reduced.distance >= d_min:
                pairs.append(reduced)
            if len(pairs) == count:
                return pairs
    raise InsufficientDataError(f"only {len(pairs)} of {count} pairs stayed above d_min={d_min} after reduction")


def _pair_record(index: int, pair: DirichletReduction) -> Dict[str, Any]:
    return {
        "pair": index,
        "x": [pair.x.horizontal.real, pair.x.horizontal.imag, pair.x.height],
        "y": [pair.y.horizontal.real, pair.y.horizontal.imag, pair.y.height],
        "distance": pair.distance,
        "certified": pair.certified,
    }


def _require_gate(group: GroupPresentation, estimate: Optional[ExponentEstimate]) -> None:
    if estimate is not None:
        gate(estimate, DIMENSION_N)
    elif group.known_delta is None:
        raise InsufficientDataError(f"{group.name}: the critical exponent gate needs a delta estimate")
    elif group.known_delta >= DIMENSION_N / 2.0:
        raise HypothesisViolationError(
            f"{group.name}: known delta {group.known_delta} >= n/2", diagnostics={"known_delta": group.known_delta}
        )


def _hypothesis_cells(
    lam: float,
    group: GroupPresentation,
    cache: OrbitCache,
    pairs: Sequence[Tuple[HalfSpacePoint, HalfSpacePoint, float]],
    j_set: Sequence[int],
    extended_j_set: Sequence[int],
    s: float,
    estimate: Optional[ExponentEstimate],
) -> List[Dict[str, Any]]:
    rows: List[Dict[str, Any]] = []
    for index, (x, y, d) in enumerate(pairs):
        for j in sorted(set(j_set) | set(extended_j_set)):
            kv = automorphic_kernel(group, cache, KernelQuery(lam, d, j), x, y, s=s, estimate=estimate)
            base = {"lambda": lam, "pair": index, "d": d, "j": j, "tail_bound": kv.tail_bound, "case": kv.case}
            if j in j_set:
                envelope = float(euclidean_envelope(lam, d, MANIFOLD_DIMENSION, j))
                rows.append(
                    {
                        **base,
                        "series": f"j{j}",
                        "value": kv.value,
                        "envelope": envelope,
                        "ratio": (abs(kv.value) + kv.tail_bound) / envelope,
                    }
                )
            if j in extended_j_set:
                images = kv.value - kv.identity_term
                envelope = lam ** (DIMENSION_N / 2.0)
                rows.append(
                    {
                        **base,
                        "series": f"ext_j{j}",
                        "value": images,
                        "envelope": envelope,
                        "ratio": (abs(images) + kv.tail_bound) / envelope,
                    }
                )
    return rows


def _case_i_growth(cells: pd.DataFrame, case_slopes: Dict[str, float], slope_tol: float) -> Dict[str, Dict[str, float]]:
    """Series whose Case I cells (pairs closer than l0 / 2) alone grow faster than slope_tol."""
    summary: Dict[str, Dict[str, float]] = {}
    case_cells = cells[cells["case"] == CASE_I]
    for label, frame in case_cells.groupby("series", sort=True):
        slope = case_slopes.get(f"{label}_case{CASE_I}", 0.0)
        if slope <= slope_tol:
            continue
        worst = frame.loc[frame["ratio"].idxmax()]
        summary[str(label)] = {
            "slope": slope,
            "min_d": float(frame["d"].min()),
            "max_ratio": float(worst["ratio"]),
            "max_ratio_d": float(worst["d"]),
            "max_ratio_lambda": float(worst["lambda"]),
        }
        logger.warning("%s grows like lambda^%.3f on Case I pairs (d >= %.3f)", label, slope, summary[str(label)]["min_d"])
    return summary


def check_abstract_hypothesis(
    group: GroupPresentation,
    cache: OrbitCache,
    lambdas: Sequence[float],
    pairs: Sequence[DirichletReduction],
    estimate: Optional[ExponentEstimate] = None,
    j_set: Optional[Sequence[int]] = None,
    extended_j_set: Sequence[int] = (1, 2, 3),
    slope_tol: float = 0.1,
    s: Optional[float] = None,
    threads: int = 1,
    seed: Optional[int] = None,
) -> BoundCheckReport:
    """
    Automorphic sums against the abstract restriction hypothesis.

    For j in j_set the ratio is (|sum| + tail) / lam^{m-1-j} (1 + lam d)^{-(m-1)/2+j}; for j in
    extended_j_set the non-identity part is compared with lam^{n/2}. Refuses to run when the
    critical exponent gate fails.
    """
    _require_gate(group, estimate)
    if not pairs:
        raise DomainError("at least one sample pair is needed")
    j_set = tuple(hypothesis_orders(MANIFOLD_DIMENSION) if j_set is None else j_set)
    s_used, _ = resolve_s(group, s, estimate)
    plain_pairs = [(p.x, p.y, p.distance) for p in pairs]
    worker = partial(
        _hypothesis_cells,
        group=group,
        cache=cache,
        pairs=plain_pairs,
        j_set=j_set,
        extended_j_set=tuple(extended_j_set),
        s=s_used,
        estimate=estimate,
    )
    chunks = _map_lambdas(worker, [float(v) for v in lambdas], threads)
    cells = pd.DataFrame([row for chunk in chunks for row in chunk])
    constants, slopes, notes = _sup_slopes(cells)
    case_slopes: Dict[str, float] = {}
    for case, frame in cells.groupby("case", sort=True):
        _, sub, _ = _sup_slopes(frame)
        case_slopes.update({f"{key}_case{case}": value for key, value in sub.items()})
    small_distance = _case_i_growth(cells, case_slopes, slope_tol)
    report = BoundCheckReport(
        check="abstract_hypothesis",
        group=group.name,
        j_set=j_set,
        lambdas=[float(v) for v in lambdas],
        cells=cells,
        constants=constants,
        slopes=slopes,
        slope_tol=slope_tol,
        pairs=[_pair_record(i, p) for i, p in enumerate(pairs)],
        seed=seed,
        details={
            "s_used": s_used,
            "radius": cache.radius,
            "extended_j_set": list(extended_j_set),
            "case_slopes": case_slopes,
            "case_I_small_distance": small_distance,
            "delta": estimate.as_dict() if estimate is not None else {"known_delta": group.known_delta},
            "notes": notes,
        },
    )
    logger.info("abstract hypothesis on %s: %s (slopes %s)", group.name, "PASS" if report.passed else "FAIL", slopes)
    return report


def _truncation_rows(
    lam: float,
    group: GroupPresentation,
    cache: OrbitCache,
    short: OrbitCache,
    pairs: Sequence[Tuple[HalfSpacePoint, HalfSpacePoint, float]],
    j_set: Sequence[int],
    s: float,
    estimate: Optional[ExponentEstimate],
) -> List[Dict[str, Any]]:
    rows = []
    for index, (x, y, d) in enumerate(pairs):
        for j in j_set:
            q = KernelQuery(lam, d, j)
            near = automorphic_kernel(group, short, q, x, y, s=s, estimate=estimate)
            far = automorphic_kernel(group, cache, q, x, y, s=s, estimate=estimate)
            change = abs(near.value - far.value)
            slack = 1e-12 * max(1.0, abs(far.value))
            rows.append(
                {
                    "lambda": lam,
                    "pair": index,
                    "d": d,
                    "j": j,
                    "value_T": near.value,
                    "value_2T": far.value,
                    "change": change,
                    "tail_bound_T": near.tail_bound,
                    "sound": bool(change <= near.tail_bound + slack),
                }
            )
    return rows


def check_truncation(
    group: GroupPresentation,
    cache: OrbitCache,
    lambdas: Sequence[float],
    pairs: Sequence[DirichletReduction],
    j_set: Sequence[int] = (0, 1, 2),
    factor: float = 2.0,
    estimate: Optional[ExponentEstimate] = None,
    s: Optional[float] = None,
    threads: int = 1,
) -> CheckReport:
    """|value(T) - value(factor T)| <= tail_bound(T), with T = cache.radius / factor."""
    s_used, _ = resolve_s(group, s, estimate)
    short = cache.truncated(cache.radius / factor)
    worker = partial(
        _truncation_rows,
        group=group,
        cache=cache,
        short=short,
        pairs=[(p.x, p.y, p.distance) for p in pairs],
        j_set=tuple(j_set),
        s=s_used,
        estimate=estimate,
    )
    rows = pd.DataFrame([row for chunk in _map_lambdas(worker, [float(v) for v in lambdas], threads) for row in chunk])
    passed = bool(rows["sound"].all())
    return CheckReport(
        check="truncation",
        group=group.name,
        passed=passed,
        metrics={
            "radius_T": short.radius,
            "radius_2T": cache.radius,
            "evaluations": len(rows),
            "violations": int((~rows["sound"]).sum()),
            "max_change_over_bound": float((rows["change"] / rows["tail_bound_T"]).max()),
            "s_used": s_used,
        },
        rows=rows,
    )


def check_lemma_distance(
    group: GroupPresentation,
    cache: OrbitCache,
    pairs: Optional[Sequence[DirichletReduction]] = None,
    radius_factor: float = 2.0,
) -> CheckReport:
    """
    Empirical sup of e^{l_g - d(x, g y)} over elements with l_g > radius_factor * l0.

    Also reports the sup divided by (1 - |x|^2)(1 - |y|^2) after moving x to the ball center.
    The check is empirical: a finite sup passes.
    """
    if pairs is None:
        o = group.basepoint
        pairs = [reduce_to_dirichlet(group, cache, o, o)]
    if not cache.non_identity.any():
        return CheckReport(
            check="lemma_distance",
            group=group.name,
            passed=True,
            metrics={"sup_ratio": 0.0, "ball_weighted_sup": 0.0, "elements": 0, "empirical": True},
            label="PASS (vacuous)",
        )
    l0 = shortest_displacement(cache).value
    threshold = radius_factor * l0
    mask = cache.non_identity & (cache.displacement > threshold)
    rows = []
    for index, pair in enumerate(pairs):
        if not mask.any():
            break
        distances = orbit_distances(cache.matrices[mask], pair.x, pair.y)
        ratio = float(np.exp(cache.displacement[mask] - distances).max())
        recenter = inverse(isometry_to(pair.x))
        y_ball = ball_from_halfspace(apply(recenter, pair.y))
        weight = 1.0 - y_ball.norm ** 2
        rows.append({"pair": index, "d": pair.distance, "sup_ratio": ratio, "ball_weighted_sup": ratio / weight})
    table = pd.DataFrame(rows, columns=["pair", "d", "sup_ratio", "ball_weighted_sup"])
    sup = float(table["sup_ratio"].max()) if len(table) else 0.0
    weighted = float(table["ball_weighted_sup"].max()) if len(table) else 0.0
    return CheckReport(
        check="lemma_distance",
        group=group.name,
        passed=bool(math.isfinite(sup) and math.isfinite(weighted)),
        metrics={
            "sup_ratio": sup,
            "ball_weighted_sup": weighted,
            "l0": l0,
            "length_threshold": threshold,
            "elements": int(mask.sum()),
            "radius": cache.radius,
            "empirical": True,
        },
        rows=table,
    )


def lemma_stability(
    group: GroupPresentation,
    cache: OrbitCache,
    pairs: Optional[Sequence[DirichletReduction]] = None,
    radius_factor: float = 2.0,
    step: float = 2.0,
    rel_tol: float = 0.05,
) -> Dict[str, Any]:
    """Relative change of the distance-lemma sup between cache.radius - step and cache.radius."""
    earlier_radius = max(cache.radius - step, 0.0)
    full = check_lemma_distance(group, cache, pairs, radius_factor)
    earlier = check_lemma_distance(group, cache.truncated(earlier_radius), pairs, radius_factor)
    before, after = earlier.metrics["sup_ratio"], full.metrics["sup_ratio"]
    change = abs(after - before) / after if after > 0 else 0.0
    return {
        "earlier_radius": earlier_radius,
        "sup_earlier": before,
        "sup_T": after,
        "relative_change": change,
        "stable": bool(change < rel_tol),
    }


def divergence_test(
    lam: float,
    l: float,
    k_grid: Sequence[int],
    j: int = 1,
    offset: float = 0.0,
    expected: Tuple[float, float] = (1.45, 1.55),
    slope_tol: float = 0.1,
) -> CheckReport:
    """
    Flat-cylinder negative control: the log-log growth of partial sums in K.

    Sums that obeyed the abstract envelope would stay bounded (slope <= slope_tol); the j = 1
    sums grow like K^{3/2}, so the expected outcome is an envelope failure inside `expected`.
    """
    k_values = [int(k) for k in k_grid]
    if len(k_values) < 4:
        raise InsufficientDataError("divergence test needs at least 4 K values")
    if any(b < a for a, b in zip(k_values, k_values[1:])):
        raise DomainError("K grid must be nondecreasing")
    sums = [euclidean_cylinder_sum(lam, offset, l, j, k) for k in k_values]
    fit = fit_growth_exponent(k_values, sums)
    envelope_holds = fit.slope <= slope_tol
    low, high = expected
    observed = (not envelope_holds) and low <= fit.slope <= high
    return CheckReport(
        check="counterexample",
        group=f"flat-cylinder(l={l:g})",
        passed=observed,
        metrics={
            "lambda": lam,
            "length": l,
            "offset": offset,
            "j": j,
            "slope": fit.slope,
            "residual_rms": fit.residual_rms,
            "expected_slope": [low, high],
            "envelope_holds": envelope_holds,
        },
        rows=pd.DataFrame({"K": k_values, "partial_sum": sums}),
        label="FAIL-as-expected" if observed else "UNEXPECTED",
    )


def _json_safe(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def report_to_json(report: Any, path: Path, config: Optional[Dict[str, Any]] = None) -> Path:
    """Versioned JSON artifact with the run config embedded; `report` is a report object or a plain dict."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = report if isinstance(report, dict) else report.as_dict()
    payload = {"artifact_version": ARTIFACT_VERSION, "config": config or {}, "report": body}
    path.write_text(json.dumps(_json_safe(payload), indent=2, sort_keys=True), encoding="utf-8")
    return path


def report_to_csv(report: Any, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    report.cells.to_csv(path, index=False)
    return path


def summarize_reports(reports: Iterable[Any]) -> pd.DataFrame:
    rows = []
    for report in reports:
        summary = report.as_dict()
        rows.append({"check": summary["check"], "group": summary["group"], "status": summary["status"], "passed": summary["passed"]})
    table = pd.DataFrame(rows, columns=["check", "group", "status", "passed"])
    if len(table):
        logger.info("%d/%d checks passed", int(table["passed"].sum()), len(table))
    return table
