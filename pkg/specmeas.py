"""Spectral-measure kernels on H^3, model-space envelopes and restriction exponent bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from errors import DomainError, UnsupportedOrderError

MAX_ORDER = 4
# Below this distance r / sinh r is taken from its Taylor series.
SERIES_CUTOFF = 1e-4
TWO_PI_SQUARED = 2.0 * math.pi ** 2


@dataclass(frozen=True)
class KernelQuery:
    """Spectral parameter `lam`, geodesic distance `r` and lambda-derivative order `j`."""

    lam: float
    r: float
    j: int = 0

    def __post_init__(self) -> None:
        lam, r = float(self.lam), float(self.r)
        if not (math.isfinite(lam) and lam >= 0.0):
            raise DomainError(f"spectral parameter must be finite and >= 0 (got {self.lam!r})")
        if not (math.isfinite(r) and r >= 0.0):
            raise DomainError(f"distance must be finite and >= 0 (got {self.r!r})")
        if int(self.j) != self.j or self.j < 0:
            raise DomainError(f"derivative order must be a nonnegative integer (got {self.j!r})")
        if self.j > MAX_ORDER:
            raise UnsupportedOrderError(f"derivative order {self.j} > {MAX_ORDER}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "j", int(self.j))

    @property
    def high_energy(self) -> bool:
        """Queries with lam < 1 are evaluated but lie outside the high-energy regime."""
        return self.lam >= 1.0


@dataclass(frozen=True)
class RestrictionExponents:
    p: float
    m: int
    p_dual: float
    p_c: float
    exponent_low: float
    exponent_high: float

    @property
    def exponent(self) -> float:
        """High-energy growth exponent of the restriction bound at this p."""
        return self.exponent_low if self.p <= self.p_c else self.exponent_high


def _check_order(j: int) -> int:
    if int(j) != j or j < 0:
        raise DomainError(f"derivative order must be a nonnegative integer (got {j!r})")
    if j > MAX_ORDER:
        raise UnsupportedOrderError(f"derivative order {j} > {MAX_ORDER}")
    return int(j)


def distance_ratio(r: np.ndarray | float) -> np.ndarray:
    """r / sinh r, equal to 1 at r = 0."""
    r = np.abs(np.asarray(r, dtype=float))
    small = r < SERIES_CUTOFF
    r2 = r * r
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        large = 2.0 * r * np.exp(-r) / -np.expm1(-2.0 * r)
    return np.where(small, 1.0 - r2 / 6.0 + 7.0 * r2 * r2 / 360.0, large)


def _oscillatory_part(lam: np.ndarray, r: np.ndarray, j: int) -> np.ndarray:
    """d^j/dlam^j of lam sin(lam r) / r, with its r -> 0 limit built in."""
    x = lam * r
    if j == 0:
        return lam * lam * np.sinc(x / math.pi)
    if j == 1:
        return lam * np.cos(x) + lam * np.sinc(x / math.pi)
    return lam * r ** (j - 1) * np.sin(x + j * math.pi / 2.0) + j * r ** (j - 2) * np.sin(
        x + (j - 1) * math.pi / 2.0
    )


def kernel_h3_grid(lam: np.ndarray | float, r: np.ndarray | float, j: int = 0) -> np.ndarray:
    """
    lam-derivatives of K(lam, r) = lam sin(lam r) / (2 pi^2 sinh r) on broadcast grids.

    K is the Schwartz kernel of the spectral measure of sqrt(Delta - 1) on H^3 at distance r. It is
    even in lam, so the j-th derivative has parity (-1)^j.
    """
    j = _check_order(j)
    lam = np.asarray(lam, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("distances must be >= 0")
    return distance_ratio(r) * _oscillatory_part(lam, r, j) / TWO_PI_SQUARED


def kernel_h3(q: KernelQuery) -> float:
    return float(kernel_h3_grid(q.lam, q.r, q.j))


def kernel_h3_amplitude(lam: np.ndarray | float, r: np.ndarray | float, j: int = 0) -> np.ndarray:
    """
    Majorant of |d^j K/dlam^j| from |sin| <= 1 and |sin x / x| <= min(1, 1/x).

    (r / sinh r)(lam r^{j-1} + j r^{j-2}) / (2 pi^2) for j >= 2; the lam-factors for j = 0, 1 are
    lam min(lam, 1/r) and lam + min(lam, 1/r).
    """
    j = _check_order(j)
    lam = np.abs(np.asarray(lam, dtype=float))
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        inverse = np.minimum(lam, 1.0 / r)
    if j == 0:
        shape = lam * inverse
    elif j == 1:
        shape = lam + inverse
    else:
        shape = lam * r ** (j - 1) + j * r ** (j - 2)
    return distance_ratio(r) * shape / TWO_PI_SQUARED


def bound_h3_grid(
    lam: np.ndarray | float,
    r: np.ndarray | float,
    j: int,
    l0: float,
    cutoff: Optional[float] = None,
) -> np.ndarray:
    """
    Two-regime envelope on H^3 without its constant.

    Below the cutoff (default l0 / 2): lam^{2-j} (1 + lam r)^{j-1}. At or above it:
    lam r^j e^{-r}.
    """
    j = _check_order(j)
    if not (math.isfinite(l0) and l0 > 0):
        raise DomainError(f"l0 must be positive (got {l0!r})")
    split = l0 / 2.0 if cutoff is None else float(cutoff)
    if not split > 0:
        raise DomainError(f"cutoff must be positive (got {cutoff!r})")
    lam = np.asarray(lam, dtype=float)
    r = np.asarray(r, dtype=float)
    near = lam ** (2 - j) * (1.0 + lam * r) ** (j - 1.0)
    far = lam * r ** j * np.exp(-r)
    return np.where(r < split, near, far)


def bound_h3(q: KernelQuery, l0: float, cutoff: Optional[float] = None) -> float:
    return float(bound_h3_grid(q.lam, q.r, q.j, l0, cutoff))


def euclidean_envelope(lam: np.ndarray | float, r: np.ndarray | float, d: int, j: int) -> np.ndarray:
    """lam^{d-1-j} (1 + lam r)^{-(d-1)/2 + j}; with d = m it is also the abstract hypothesis envelope."""
    if int(d) != d or d < 2:
        raise DomainError(f"dimension must be an integer >= 2 (got {d!r})")
    j = _check_order(j)
    lam = np.asarray(lam, dtype=float)
    r = np.asarray(r, dtype=float)
    return lam ** (d - 1 - j) * (1.0 + lam * r) ** (-(d - 1) / 2.0 + j)


def critical_exponent_p(m: int) -> float:
    """Endpoint p_c = 2(m + 1)/(m + 3) of the restriction range in dimension m."""
    return 2.0 * (m + 1) / (m + 3)


def ts_exponents(p: float, m: int) -> RestrictionExponents:
    if not (isinstance(p, (int, float)) and 1.0 <= p < 2.0):
        raise DomainError(f"p must lie in [1, 2) (got {p!r})")
    if int(m) != m or m < 2:
        raise DomainError(f"dimension m must be an integer >= 2 (got {m!r})")
    dual_inv = 1.0 - 1.0 / p
    return RestrictionExponents(
        p=float(p),
        m=int(m),
        p_dual=math.inf if dual_inv == 0.0 else 1.0 / dual_inv,
        p_c=critical_exponent_p(m),
        exponent_low=m * (1.0 / p - dual_inv) - 1.0,
        exponent_high=(m - 1) * (1.0 / p - 0.5),
    )


def abstract_conclusion_exponent(p: float, m: int) -> float:
    """m(1/p - 1/p') - 1, the growth of the abstract restriction estimate on 1 <= p <= p_c."""
    exps = ts_exponents(p, m)
    if p > exps.p_c:
        raise DomainError(f"p = {p} lies above p_c = {exps.p_c}")
    return exps.exponent_low


def hypothesis_orders(m: int) -> Tuple[int, ...]:
    """Derivative orders at which the abstract restriction theorem needs kernel bounds."""
    if int(m) != m or m < 2:
        raise DomainError(f"dimension m must be an integer >= 2 (got {m!r})")
    if m % 2:
        orders = {0, (m - 3) // 2, (m + 1) // 2}
    else:
        orders = {0, m // 2 - 1, m // 2}
    return tuple(sorted(orders))
