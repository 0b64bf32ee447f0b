"""Exact hyperbolic geometry of H^3 in the upper half-space model, with a Poincare ball bridge."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np

from errors import (
    AmbiguousClassificationError,
    DomainError,
    PrecisionError,
    UnsupportedElementError,
)

IDENTITY = "identity"
ELLIPTIC = "elliptic"
PARABOLIC = "parabolic"
LOXODROMIC = "loxodromic"

# Heights below this after an action are treated as underflow.
MIN_HEIGHT = 1e-300
# Refusal band around the boundary of [-2, 2] when classifying by trace.
CLASSIFICATION_BAND = 1e-9
# Traces this close to +-2 (or to the real axis) are taken as exact.
EXACT_TRACE_TOL = 1e-12
IDENTITY_TOL = 1e-10
SINGULAR_TOL = 1e-14
# 1 - |b|^2 below this is too close to the sphere at infinity.
BALL_BOUNDARY_TOL = 1e-14


@dataclass(frozen=True)
class HalfSpacePoint:
    """Point z + t j of upper half-space; `horizontal` is z, `height` is t > 0."""

    horizontal: complex
    height: float

    def __post_init__(self) -> None:
        z = complex(self.horizontal)
        t = float(self.height)
        if not (math.isfinite(z.real) and math.isfinite(z.imag) and math.isfinite(t)):
            raise DomainError(f"non-finite half-space coordinates ({z}, {t})")
        if t <= 0.0:
            raise DomainError(f"half-space height must be positive (got {t})")
        object.__setattr__(self, "horizontal", z)
        object.__setattr__(self, "height", t)

    @classmethod
    def origin(cls) -> "HalfSpacePoint":
        """The point (0, 0; 1), which the ball model sends to its center."""
        return cls(0j, 1.0)


@dataclass(frozen=True)
class BallPoint:
    coords: Tuple[float, float, float]

    def __post_init__(self) -> None:
        coords = tuple(float(v) for v in self.coords)
        if len(coords) != 3 or not all(math.isfinite(v) for v in coords):
            raise DomainError(f"ball point needs three finite coordinates (got {self.coords!r})")
        if sum(v * v for v in coords) >= 1.0:
            raise DomainError("ball point must have Euclidean norm < 1")
        object.__setattr__(self, "coords", coords)

    @property
    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.coords))


@dataclass(frozen=True)
class Isometry:
    """
    Unit-determinant 2x2 complex matrix [[a, b], [c, d]] acting on H^3.

    Entries are rescaled by sqrt(ad - bc) on construction, so every instance has determinant 1.
    The matrices g and -g are the same isometry; identity checks compare against both signs.
    """

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self) -> None:
        entries = [complex(v) for v in (self.a, self.b, self.c, self.d)]
        if not all(math.isfinite(v.real) and math.isfinite(v.imag) for v in entries):
            raise DomainError("isometry entries must be finite")
        a, b, c, d = entries
        det = a * d - b * c
        scale = max(abs(v) for v in entries) ** 2
        if scale == 0.0 or abs(det) <= SINGULAR_TOL * scale:
            raise PrecisionError(f"matrix is numerically singular (det={det})")
        root = cmath.sqrt(det)
        for name, value in zip("abcd", entries):
            object.__setattr__(self, name, value / root)

    @classmethod
    def identity(cls) -> "Isometry":
        return cls(1, 0, 0, 1)

    @classmethod
    def from_array(cls, matrix: np.ndarray) -> "Isometry":
        return cls(matrix[0, 0], matrix[0, 1], matrix[1, 0], matrix[1, 1])

    @property
    def trace(self) -> complex:
        return self.a + self.d

    @property
    def determinant(self) -> complex:
        return self.a * self.d - self.b * self.c

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=np.complex128)

    def __matmul__(self, other: "Isometry") -> "Isometry":
        return compose(self, other)


def _require_point(p: HalfSpacePoint) -> None:
    if not isinstance(p, HalfSpacePoint):
        raise DomainError(f"expected HalfSpacePoint, got {type(p).__name__}")


def distance(p: HalfSpacePoint, q: HalfSpacePoint) -> float:
    """Hyperbolic distance; cosh d = 1 + (|z - z'|^2 + (t - t')^2) / (2 t t')."""
    _require_point(p)
    _require_point(q)
    chord = math.hypot(abs(p.horizontal - q.horizontal), p.height - q.height)
    # cosh d - 1 = 2 sinh^2(d/2) keeps short distances accurate.
    return 2.0 * math.asinh(chord / (2.0 * math.sqrt(p.height * q.height)))


def apply(g: Isometry, p: HalfSpacePoint) -> HalfSpacePoint:
    """Action of g on p = z + t j by the quaternionic Mobius formula."""
    _require_point(p)
    z, t = p.horizontal, p.height
    cz_d = g.c * z + g.d
    denom = abs(cz_d) ** 2 + abs(g.c) ** 2 * t * t
    new_height = t / denom
    if not new_height >= MIN_HEIGHT:
        raise PrecisionError(f"image height {new_height:.3e} underflows")
    new_z = ((g.a * z + g.b) * cz_d.conjugate() + g.a * g.c.conjugate() * t * t) / denom
    return HalfSpacePoint(new_z, new_height)


def compose(g: Isometry, h: Isometry) -> Isometry:
    """Matrix product g h, i.e. apply h first."""
    return Isometry(
        g.a * h.a + g.b * h.c,
        g.a * h.b + g.b * h.d,
        g.c * h.a + g.d * h.c,
        g.c * h.b + g.d * h.d,
    )


def inverse(g: Isometry) -> Isometry:
    return Isometry(g.d, -g.b, -g.c, g.a)


def power(g: Isometry, k: int) -> Isometry:
    base = g if k >= 0 else inverse(g)
    return Isometry.from_array(np.linalg.matrix_power(base.as_array(), abs(int(k))))


def is_identity(g: Isometry, tol: float = IDENTITY_TOL) -> bool:
    """True when g equals +Id or -Id entrywise within tol."""
    eye = np.eye(2)
    matrix = g.as_array()
    return bool(np.max(np.abs(matrix - eye)) <= tol or np.max(np.abs(matrix + eye)) <= tol)


def classify(g: Isometry) -> str:
    """
    Classify by trace.

    Loxodromic iff the trace lies off the real segment [-2, 2]; parabolic iff it equals +-2 and g
    is not the identity; elliptic iff it is real and strictly inside (-2, 2). Traces within
    CLASSIFICATION_BAND of the segment that are not exactly on it are refused.
    """
    if is_identity(g):
        return IDENTITY
    tr = g.trace
    nearest = complex(min(max(tr.real, -2.0), 2.0), 0.0)
    gap = abs(tr - nearest)
    if gap > CLASSIFICATION_BAND:
        return LOXODROMIC
    if min(abs(tr - 2.0), abs(tr + 2.0)) <= EXACT_TRACE_TOL:
        return PARABOLIC
    if gap <= EXACT_TRACE_TOL and abs(tr.real) < 2.0 - CLASSIFICATION_BAND:
        return ELLIPTIC
    raise AmbiguousClassificationError(f"trace {tr} is within the classification band", tr)


def displacement_length(g: Isometry) -> float:
    """Translation length l = 2 Re arccosh(tr/2), the minimum of d(z, g z); 0 for the identity."""
    kind = classify(g)
    if kind == IDENTITY:
        return 0.0
    if kind != LOXODROMIC:
        raise UnsupportedElementError(f"displacement length needs a loxodromic element, got {kind}")
    return 2.0 * abs(cmath.acosh(g.trace / 2.0).real)


def isometry_to(p: HalfSpacePoint) -> Isometry:
    """An isometry taking (0, 0; 1) to p."""
    root = math.sqrt(p.height)
    return Isometry(root, p.horizontal / root, 0, 1.0 / root)


def ball_from_halfspace(p: HalfSpacePoint) -> BallPoint:
    """Cayley-type map sending (0, 0; 1) to the ball center."""
    _require_point(p)
    z, t = p.horizontal, p.height
    r2 = abs(z) ** 2
    denom = r2 + (t + 1.0) ** 2
    if 4.0 * t / denom < BALL_BOUNDARY_TOL:
        raise PrecisionError("point maps too close to the boundary sphere")
    return BallPoint((2.0 * z.real / denom, 2.0 * z.imag / denom, (r2 + t * t - 1.0) / denom))


def halfspace_from_ball(b: BallPoint) -> HalfSpacePoint:
    u1, u2, w = b.coords
    gap = 1.0 - (u1 * u1 + u2 * u2 + w * w)
    if gap < BALL_BOUNDARY_TOL:
        raise PrecisionError("ball point is too close to the boundary sphere")
    denom = u1 * u1 + u2 * u2 + (w - 1.0) ** 2
    return HalfSpacePoint(complex(2.0 * u1 / denom, 2.0 * u2 / denom), gap / denom)


def ball_distance(x: BallPoint, y: BallPoint) -> float:
    """arccosh(1 + 2|x - y|^2 / ((1 - |x|^2)(1 - |y|^2))), evaluated via asinh."""
    chord = math.sqrt(sum((u - v) ** 2 for u, v in zip(x.coords, y.coords)))
    weight = (1.0 - x.norm ** 2) * (1.0 - y.norm ** 2)
    return 2.0 * math.asinh(chord / math.sqrt(weight))


def distance_from_origin(b: BallPoint) -> float:
    """log((1 + |b|) / (1 - |b|))."""
    return 2.0 * math.atanh(b.norm)


# Vectorized helpers over stacks of matrices with shape (N, 2, 2).


def stack(isometries: Iterable[Isometry]) -> np.ndarray:
    mats = [g.as_array() for g in isometries]
    if not mats:
        return np.zeros((0, 2, 2), dtype=np.complex128)
    return np.stack(mats)


def apply_many(mats: np.ndarray, p: HalfSpacePoint) -> Tuple[np.ndarray, np.ndarray]:
    """Images of p under every matrix; returns (horizontal, height) arrays."""
    a, b, c, d = mats[:, 0, 0], mats[:, 0, 1], mats[:, 1, 0], mats[:, 1, 1]
    z, t = p.horizontal, p.height
    cz_d = c * z + d
    denom = np.abs(cz_d) ** 2 + np.abs(c) ** 2 * t * t
    heights = t / denom
    if heights.size and not np.all(heights >= MIN_HEIGHT):
        raise PrecisionError("orbit image height underflows")
    horizontal = ((a * z + b) * np.conj(cz_d) + a * np.conj(c) * t * t) / denom
    return horizontal, heights


def pairwise_distances(
    z1: np.ndarray | complex, t1: np.ndarray | float, z2: np.ndarray | complex, t2: np.ndarray | float
) -> np.ndarray:
    chord = np.hypot(np.abs(z1 - z2), t1 - t2)
    return 2.0 * np.arcsinh(chord / (2.0 * np.sqrt(t1 * t2)))


def orbit_distances(mats: np.ndarray, x: HalfSpacePoint, y: HalfSpacePoint) -> np.ndarray:
    """d(x, g y) for every matrix g in the stack."""
    horizontal, heights = apply_many(mats, y)
    return pairwise_distances(x.horizontal, x.height, horizontal, heights)


def displacement_lengths(mats: np.ndarray) -> np.ndarray:
    """Trace-formula displacement lengths; identity rows give 0."""
    traces = mats[:, 0, 0] + mats[:, 1, 1]
    lengths = 2.0 * np.abs(np.real(np.arccosh(traces.astype(np.complex128) / 2.0)))
    near_id = np.minimum(
        np.max(np.abs(mats - np.eye(2)), axis=(1, 2)),
        np.max(np.abs(mats + np.eye(2)), axis=(1, 2)),
    ) <= IDENTITY_TOL
    lengths[near_id] = 0.0
    return lengths
