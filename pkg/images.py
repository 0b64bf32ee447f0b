"""Method-of-images assembly of the quotient kernel with Dirichlet reduction and truncation bounds."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from errors import DomainError, HypothesisViolationError, InsufficientDataError
from exponent import ExponentEstimate, poincare_partial
from hypgeo import HalfSpacePoint, apply, distance, orbit_distances
from kleinian import GroupPresentation, OrbitCache, Word, shortest_displacement
from specmeas import KernelQuery, kernel_h3, kernel_h3_amplitude, kernel_h3_grid

logger = logging.getLogger(__name__)

# Only n = 2 (H^3) has a closed-form kernel.
DIMENSION_N = 2
MINIMALITY_TOL = 1e-9
MAX_REDUCTION_STEPS = 64
CASE_I = "I"
CASE_II = "II"


class CompensatedSum:
    """Neumaier's variant of Kahan summation."""

    def __init__(self) -> None:
        self.total = 0.0
        self.compensation = 0.0

    def add(self, value: float) -> None:
        t = self.total + value
        if abs(self.total) >= abs(value):
            self.compensation += (self.total - t) + value
        else:
            self.compensation += (value - t) + self.total
        self.total = t

    @property
    def value(self) -> float:
        return self.total + self.compensation


@dataclass(frozen=True)
class DirichletReduction:
    """y moved by the orbit element minimizing d(x, g y); unpacks as (x, y, distance)."""

    x: HalfSpacePoint
    y: HalfSpacePoint
    distance: float
    word: Word
    certified: bool
    steps: int
    warning: Optional[str] = None

    def __iter__(self) -> Iterator[object]:
        return iter((self.x, self.y, self.distance))


@dataclass(frozen=True)
class TailBound:
    T: float
    effective_radius: float
    s: float
    poincare_factor: float
    formula_value: float


@dataclass(frozen=True)
class KernelValue:
    value: float
    j: int
    lam: float
    pair_distance: float
    terms_used: int
    tail_bound: float
    s_used: float
    identity_term: float
    radius: float
    case: str
    tail: Optional[TailBound] = None

    def as_dict(self) -> Dict[str, object]:
        return {
            "lambda": self.lam,
            "j": self.j,
            "pair_distance": self.pair_distance,
            "value": self.value,
            "identity_term": self.identity_term,
            "tail_bound": self.tail_bound,
            "terms_used": self.terms_used,
            "s_used": self.s_used,
            "radius": self.radius,
            "case": self.case,
        }


def _l0(cache: OrbitCache) -> Optional[float]:
    if not cache.non_identity.any():
        return None
    return shortest_displacement(cache).value


def case_label(pair_distance: float, l0: Optional[float]) -> str:
    """Case I when the pair is closer than l0 / 2, else Case II."""
    if l0 is None or pair_distance < l0 / 2.0:
        return CASE_I
    return CASE_II


def reduce_to_dirichlet(
    group: GroupPresentation, cache: OrbitCache, x: HalfSpacePoint, y: HalfSpacePoint
) -> DirichletReduction:
    """
    Replace y by the orbit point closest to x, repeating until the identity is the minimizer.

    The minimum is certified when the cache is complete and its radius covers both
    d(o, x) + d(x, y*) + d(o, y*) (every g with d(x, g y*) <= d(x, y*) lies within it) and
    2 d(x, y*) + l0.
    """
    current = y
    word: Tuple[int, ...] = ()
    steps = 0
    while True:
        dists = orbit_distances(cache.matrices, x, current)
        best = int(np.argmin(dists))
        if dists[best] >= distance(x, current) - MINIMALITY_TOL * (1.0 + dists[best]):
            break
        steps += 1
        if steps > MAX_REDUCTION_STEPS:
            raise DomainError("Dirichlet reduction did not settle; the cache may be inconsistent")
        current = apply(cache.element(best).matrix, current)
        word = cache.word(best) + word
    reduced = distance(x, current)
    o = group.basepoint
    needed = distance(o, x) + reduced + distance(o, current)
    l0 = _l0(cache)
    if l0 is not None:
        needed = max(needed, 2.0 * reduced + l0)
    certified = bool(cache.complete and cache.radius >= needed)
    warning = None
    if not certified:
        warning = f"Dirichlet minimality needs radius {needed:.3f}; cache radius is {cache.radius:.3f}"
        logger.warning(warning)
    logger.debug("reduced pair in %d steps to distance %.6f (word %s)", steps, reduced, word)
    return DirichletReduction(
        x=x, y=current, distance=reduced, word=word, certified=certified, steps=steps, warning=warning
    )


def resolve_s(
    group: GroupPresentation,
    s: Optional[float] = None,
    estimate: Optional[ExponentEstimate] = None,
    n: int = DIMENSION_N,
) -> Tuple[float, float]:
    """
    Pick the summation exponent and the delta it is measured against.

    Without an explicit s the midpoint of (delta_hat + CI, n/2) is used. Returns (s, delta_hat).
    """
    if estimate is not None:
        delta, upper = estimate.delta_hat, estimate.upper
    elif group.known_delta is not None:
        delta = upper = float(group.known_delta)
    else:
        raise InsufficientDataError(f"{group.name}: a delta estimate is needed to choose s")
    if s is None:
        s = 0.5 * (upper + n / 2.0)
    if not delta < s < n / 2.0:
        raise HypothesisViolationError(
            f"s = {s} must lie strictly between delta_hat = {delta:.4f} and n/2 = {n / 2.0}",
            diagnostics={"s": s, "delta_hat": delta, "delta_upper": upper, "n": n},
        )
    if s <= upper:
        logger.warning("s = %.4f lies inside the confidence band of delta (upper %.4f)", s, upper)
    return float(s), float(delta)


def _sup_power_exp(power: int, rate: float, start: float) -> float:
    """sup over r >= start of r^power e^{-rate r}; the maximizer is max(start, power / rate)."""
    r = max(start, power / rate)
    return r ** power * math.exp(-rate * r)


def _tail_majorant(lam: float, j: int, s: float, start: float, n: int = DIMENSION_N) -> float:
    """
    Per-unit-weight majorant of |d^j K| e^{s r} beyond `start`.

    With r / sinh r <= 2 r e^{-r} / (1 - e^{-2 start}) every term beyond `start` is at most
    c (lam r^j + j r^{j-1}) e^{-(n/2 - s) r} e^{-s r}.
    """
    rate = n / 2.0 - s
    c = 1.0 / (math.pi ** 2 * -math.expm1(-2.0 * start))
    shape = lam * _sup_power_exp(j, rate, start)
    if j > 0:
        shape += j * _sup_power_exp(j - 1, rate, start)
    return c * shape


def tail_bound(
    group: GroupPresentation,
    cache: OrbitCache,
    q: KernelQuery,
    x: HalfSpacePoint,
    y: HalfSpacePoint,
    s: float,
    delta_hat: float,
) -> TailBound:
    """
    Bound on the images outside the cache.

    Missing elements have d(o, g o) > T, so d(x, g y) > T - d(o, x) - d(o, y). Their sum is
    dominated by the majorant above times the Poincare series G_s(x, y).
    """
    o = group.basepoint
    effective = cache.radius - distance(o, x) - distance(o, y)
    if group.rank == 0:
        return TailBound(cache.radius, effective, s, 1.0, 0.0)
    series = poincare_partial(cache, s, x, y, delta_hat=delta_hat)
    factor = series.total
    if effective <= 0 or not math.isfinite(factor):
        logger.warning("no usable tail bound at radius %.3f (effective %.3f)", cache.radius, effective)
        return TailBound(cache.radius, effective, s, factor, math.inf)
    value = _tail_majorant(q.lam, q.j, s, effective) * factor
    return TailBound(cache.radius, effective, s, factor, value)


def _check_cases(
    distances: np.ndarray,
    non_identity: np.ndarray,
    pair_distance: float,
    l0: Optional[float],
    enforce: bool,
) -> str:
    label = case_label(pair_distance, l0)
    others = distances[non_identity]
    if not others.size:
        return label
    floor = l0 / 2.0 if label == CASE_I else pair_distance
    worst = float(others.min())
    if worst < floor - MINIMALITY_TOL * (1.0 + floor):
        diagnostics = {"case": label, "pair_distance": pair_distance, "l0": l0, "min_image_distance": worst}
        message = f"Case {label} inequality fails: an image lies at {worst:.6f} < {floor:.6f}"
        if enforce:
            raise HypothesisViolationError(message, diagnostics=diagnostics)
        logger.warning("%s (uncertified l0 or reduction; continuing)", message)
    return label


def automorphic_kernel(
    group: GroupPresentation,
    cache: OrbitCache,
    q: KernelQuery,
    x: HalfSpacePoint,
    y: HalfSpacePoint,
    s: Optional[float] = None,
    estimate: Optional[ExponentEstimate] = None,
) -> KernelValue:
    """
    Sum d^j K(lam, d(x, g y)) over the cache, with a rigorous bound for the rest of the group.

    (x, y) must already be Dirichlet-reduced. Terms are accumulated by increasing distance,
    exactly per unit-width shell and compensated across shells.
    """
    s_used, delta = resolve_s(group, s, estimate)
    distances = orbit_distances(cache.matrices, x, y)
    order = np.argsort(distances, kind="stable")
    sorted_d = distances[order]
    terms = kernel_h3_grid(q.lam, sorted_d, q.j)
    shells = np.floor(sorted_d).astype(np.int64)
    boundaries = np.flatnonzero(np.diff(shells)) + 1
    total = CompensatedSum()
    for chunk in np.split(terms, boundaries):
        total.add(math.fsum(chunk))

    pair_distance = distance(x, y)
    l0_info = shortest_displacement(cache) if cache.non_identity.any() else None
    l0 = l0_info.value if l0_info is not None else None
    enforce = l0_info is None or l0_info.certified
    label = _check_cases(distances, cache.non_identity, pair_distance, l0, enforce)

    if cache.complete:
        tail = tail_bound(group, cache, q, x, y, s_used, delta)
        bound = tail.formula_value
    else:
        logger.warning("kernel summed over an incomplete cache; tail bound is unbounded")
        tail, bound = None, math.inf
    return KernelValue(
        value=total.value,
        j=q.j,
        lam=q.lam,
        pair_distance=pair_distance,
        terms_used=len(cache),
        tail_bound=bound,
        s_used=s_used,
        identity_term=kernel_h3(KernelQuery(q.lam, pair_distance, q.j)),
        radius=cache.radius,
        case=label,
        tail=tail,
    )


def split_by_displacement(
    group: GroupPresentation,
    cache: OrbitCache,
    q: KernelQuery,
    x: HalfSpacePoint,
    y: HalfSpacePoint,
    R: float,
    s: Optional[float] = None,
    estimate: Optional[ExponentEstimate] = None,
) -> Dict[str, float]:
    """
    Split the non-identity images into l_g <= R and l_g > R.

    The short part is majorized by its count times its largest amplitude; the long part by
    the s-domination majorant times the matching partial Poincare sum.
    """
    s_used, _ = resolve_s(group, s, estimate)
    distances = orbit_distances(cache.matrices, x, y)
    values = kernel_h3_grid(q.lam, distances, q.j)
    mask = cache.non_identity
    short = mask & (cache.displacement <= R)
    long_ = mask & ~short
    short_majorant = 0.0
    if short.any():
        short_majorant = int(short.sum()) * float(kernel_h3_amplitude(q.lam, distances[short], q.j).max())
    long_majorant = 0.0
    if long_.any():
        start = float(distances[long_].min())
        weights = math.fsum(np.exp(-s_used * distances[long_]))
        long_majorant = _tail_majorant(q.lam, q.j, s_used, max(start, 1e-12)) * weights
    return {
        "R": float(R),
        "short_count": int(short.sum()),
        "short_sum": math.fsum(values[short]),
        "short_majorant": short_majorant,
        "long_count": int(long_.sum()),
        "long_sum": math.fsum(values[long_]),
        "long_majorant": long_majorant,
        "s_used": s_used,
    }


def euclidean_cylinder_sum(lam: float, offset: float, l: float, j: int, K: int) -> float:
    """Partial sum over |k| <= K of (1 + lam |offset + k l|)^{j - 1/2} on the flat cylinder R x (R / lZ)."""
    if j not in (0, 1):
        raise DomainError(f"the flat-cylinder sum is defined for j in {{0, 1}} (got {j!r})")
    if int(K) != K or K < 1:
        raise DomainError(f"K must be a positive integer (got {K!r})")
    if not l > 0:
        raise DomainError(f"cylinder length must be positive (got {l!r})")
    k = np.arange(-int(K), int(K) + 1, dtype=float)
    terms = (1.0 + lam * np.abs(offset + k * l)) ** (j - 0.5)
    return math.fsum(terms)
