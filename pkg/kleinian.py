"""Group presentations, reduced-word orbit enumeration, displacement census and cache persistence."""

from __future__ import annotations

import io
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Set, Tuple, Union

import numpy as np
import pandas as pd

from errors import (
    AmbiguousClassificationError,
    BudgetExceededError,
    CacheFormatError,
    DomainError,
    InsufficientDataError,
    InvalidGroupError,
)
from hypgeo import (
    LOXODROMIC,
    HalfSpacePoint,
    Isometry,
    classify,
    displacement_lengths,
    orbit_distances,
)

logger = logging.getLogger(__name__)

CACHE_FORMAT_VERSION = 1
DEFAULT_ELEMENT_CAP = 5_000_000
# Slack when comparing orbit distances against radii (closed-form distances land on the edge).
ORBIT_TOL = 1e-9
# Distinct short words whose matrices agree this closely suggest a non-discrete or non-free input.
COINCIDENCE_TOL = 1e-6
COINCIDENCE_MAX_LENGTH = 4

GeneratorSpec = Union[Isometry, Tuple[str, Isometry]]
Word = Tuple[int, ...]


@dataclass(frozen=True)
class GroupPresentation:
    """
    Generators with labels acting on H^3, plus the basepoint o used for orbit distances.

    Letters are signed generator indices: k means generator k (1-based), -k its inverse.
    `dimension_n` is 1 when every entry is real (the group preserves a copy of H^2), else 2.
    """

    generators: Tuple[Tuple[str, Isometry], ...]
    basepoint: HalfSpacePoint = field(default_factory=HalfSpacePoint.origin)
    dimension_n: int = 2
    name: str = "custom"
    known_delta: Optional[float] = None
    params: Dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def labels(self) -> List[str]:
        return [label for label, _ in self.generators]

    @property
    def rank(self) -> int:
        return len(self.generators)

    @property
    def letters(self) -> List[int]:
        return [k for idx in range(1, self.rank + 1) for k in (idx, -idx)]

    def letter_matrix(self, letter: int) -> np.ndarray:
        if letter == 0 or abs(letter) > self.rank:
            raise DomainError(f"letter {letter} outside 1..{self.rank}")
        matrix = self.generators[abs(letter) - 1][1].as_array()
        if letter < 0:
            a, b, c, d = matrix.ravel()
            matrix = np.array([[d, -b], [-c, a]], dtype=np.complex128)
        return matrix

    def word_matrix(self, word: Sequence[int]) -> Isometry:
        matrix = np.eye(2, dtype=np.complex128)
        for letter in word:
            matrix = matrix @ self.letter_matrix(letter)
        return Isometry.from_array(matrix)

    def word_label(self, word: Sequence[int]) -> str:
        if not word:
            return "Id"
        labels = self.labels
        return " ".join(labels[abs(k) - 1] + ("^-1" if k < 0 else "") for k in word)


@dataclass(frozen=True)
class OrbitElement:
    word: Word
    matrix: Isometry
    orbit_distance: float
    displacement: float


@dataclass(frozen=True)
class ShortestDisplacement:
    value: float
    certified: bool

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class DisplacementCount:
    radius: float
    count: int
    certified: bool
    warning: Optional[str] = None


@dataclass
class OrbitCache:
    """
    Reduced words with orbit_distance d(o, g o) <= radius, sorted by that distance.

    Arrays are read-only after construction. `words` is zero-padded, one row per element.
    """

    group: GroupPresentation
    radius: float
    words: np.ndarray
    matrices: np.ndarray
    orbit_distance: np.ndarray
    displacement: np.ndarray
    complete: bool
    explored: int = 0

    def __post_init__(self) -> None:
        for arr in (self.words, self.matrices, self.orbit_distance, self.displacement):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return int(self.orbit_distance.shape[0])

    def word(self, index: int) -> Word:
        row = self.words[index]
        return tuple(int(k) for k in row if k != 0)

    def element(self, index: int) -> OrbitElement:
        return OrbitElement(
            word=self.word(index),
            matrix=Isometry.from_array(self.matrices[index]),
            orbit_distance=float(self.orbit_distance[index]),
            displacement=float(self.displacement[index]),
        )

    def __iter__(self) -> Iterator[OrbitElement]:
        for index in range(len(self)):
            yield self.element(index)

    def word_set(self) -> Set[Word]:
        return {self.word(i) for i in range(len(self))}

    @property
    def word_lengths(self) -> np.ndarray:
        return np.count_nonzero(self.words, axis=1)

    @property
    def non_identity(self) -> np.ndarray:
        return self.word_lengths > 0

    def truncated(self, radius: float) -> "OrbitCache":
        """Sub-cache of elements within a smaller radius; completeness carries over."""
        if radius > self.radius + ORBIT_TOL:
            raise DomainError(f"cannot truncate a radius-{self.radius} cache to {radius}")
        keep = self.orbit_distance <= radius + ORBIT_TOL
        return OrbitCache(
            group=self.group,
            radius=float(radius),
            words=self.words[keep].copy(),
            matrices=self.matrices[keep].copy(),
            orbit_distance=self.orbit_distance[keep].copy(),
            displacement=self.displacement[keep].copy(),
            complete=self.complete,
            explored=self.explored,
        )


def validate_presentation(
    gens: Sequence[GeneratorSpec],
    basepoint: Optional[HalfSpacePoint] = None,
    name: str = "custom",
    known_delta: Optional[float] = None,
    params: Optional[Dict[str, Any]] = None,
) -> GroupPresentation:
    """Check that every generator is loxodromic and labels are unique."""
    if not gens:
        raise InvalidGroupError("a presentation needs at least one generator")
    generators: List[Tuple[str, Isometry]] = []
    for idx, spec in enumerate(gens):
        if isinstance(spec, Isometry):
            label, matrix = _default_label(idx), spec
        else:
            label, matrix = spec
            if not isinstance(matrix, Isometry):
                matrix = Isometry(*matrix)
        try:
            kind = classify(matrix)
        except AmbiguousClassificationError as exc:
            raise InvalidGroupError(f"generator {label}: {exc}") from exc
        if kind != LOXODROMIC:
            raise InvalidGroupError(f"generator {label} is {kind}; convex cocompact groups need loxodromics")
        generators.append((str(label), matrix))
    labels = [label for label, _ in generators]
    if len(set(labels)) != len(labels):
        raise InvalidGroupError(f"generator labels must be unique (got {labels})")
    real = all(
        abs(entry.imag) <= 1e-14 for _, g in generators for entry in (g.a, g.b, g.c, g.d)
    )
    return GroupPresentation(
        generators=tuple(generators),
        basepoint=basepoint if basepoint is not None else HalfSpacePoint.origin(),
        dimension_n=1 if real else 2,
        name=name,
        known_delta=known_delta,
        params=dict(params or {}),
    )


def _default_label(index: int) -> str:
    return "abcdefghijklmnopqrstuvwxyz"[index] if index < 26 else f"g{index}"


def trivial_group(basepoint: Optional[HalfSpacePoint] = None) -> GroupPresentation:
    """The group {Id}; its orbit sums have a single term."""
    return GroupPresentation(
        generators=(),
        basepoint=basepoint if basepoint is not None else HalfSpacePoint.origin(),
        dimension_n=2,
        name="trivial",
        known_delta=0.0,
    )


def cylinder_group(length: float) -> GroupPresentation:
    """
    Hyperbolic cylinder: Z acting by the dilation diag(e^{l/2}, e^{-l/2}).

    The basepoint (0, 0; 1) sits on the invariant axis, so d(o, g^k o) = |k| l. The limit set is
    {0, infinity}, hence known_delta = 0.
    """
    if not (isinstance(length, (int, float)) and math.isfinite(length) and length > 0):
        raise DomainError(f"cylinder length must be positive (got {length!r})")
    half = length / 2.0
    generator = Isometry(math.exp(half), 0, 0, math.exp(-half))
    return validate_presentation(
        [("a", generator)],
        basepoint=HalfSpacePoint.origin(),
        name=f"cylinder(l={length:g})",
        known_delta=0.0,
        params={"builtin": "cylinder", "length": float(length)},
    )


def symmetric_schottky_group(length: float) -> GroupPresentation:
    """
    Two-generator Fuchsian Schottky group with perpendicular axes through the basepoint.

    a translates by `length` along the geodesic from -1 to 1, b along the vertical axis.
    With rho = length / 2, a pairs its isometric circles |z +- coth rho| = 1 / sinh rho and
    b = diag(e^rho, e^-rho) pairs the circles |z| = e^-rho and |z| = e^rho. The a-disks lie in
    the annulus between the b-circles iff tanh(rho / 2) > e^-rho, i.e. length > log(3 + 2 sqrt 2);
    shrinking `length` toward that threshold increases delta.
    """
    threshold = math.log(3.0 + 2.0 * math.sqrt(2.0))
    if not (isinstance(length, (int, float)) and math.isfinite(length)):
        raise DomainError(f"Schottky length must be finite (got {length!r})")
    if length <= threshold:
        raise InvalidGroupError(
            f"translation length {length} <= {threshold:.6f}: isometric circles intersect"
        )
    rho = length / 2.0
    a = Isometry(math.cosh(rho), math.sinh(rho), math.sinh(rho), math.cosh(rho))
    b = Isometry(math.exp(rho), 0, 0, math.exp(-rho))
    return validate_presentation(
        [("a", a), ("b", b)],
        basepoint=HalfSpacePoint.origin(),
        name=f"schottky(l={length:g})",
        params={"builtin": "schottky", "length": float(length)},
    )


def schottky_from_circles(
    pairs: Sequence[Tuple[Tuple[complex, float], Tuple[complex, float]]],
    basepoint: Optional[HalfSpacePoint] = None,
) -> GroupPresentation:
    """
    Classical Schottky generators from circle pairings.

    Each pairing ((c, r), (c', r')) gives z -> c' + r r' / (z - c), mapping the exterior of the
    source circle onto the interior of the target circle. All closed disks must be disjoint.
    """
    disks: List[Tuple[complex, float]] = []
    generators: List[Tuple[str, Isometry]] = []
    for idx, ((c1, r1), (c2, r2)) in enumerate(pairs):
        c1, c2 = complex(c1), complex(c2)
        if r1 <= 0 or r2 <= 0:
            raise DomainError("circle radii must be positive")
        disks.extend([(c1, float(r1)), (c2, float(r2))])
        generators.append((_default_label(idx), Isometry(c2, r1 * r2 - c1 * c2, 1, -c1)))
    for i in range(len(disks)):
        for j in range(i + 1, len(disks)):
            (ci, ri), (cj, rj) = disks[i], disks[j]
            if abs(ci - cj) <= ri + rj:
                raise InvalidGroupError(f"Schottky disks {i} and {j} intersect")
    return validate_presentation(
        generators,
        basepoint=basepoint,
        name=f"schottky_circles({len(generators)})",
        params={"builtin": "schottky_circles", "pairs": len(generators)},
    )


def _complex(pair: Dict[str, float]) -> complex:
    return complex(float(pair["re"]), float(pair["im"]))


def group_from_config(config: Dict[str, Any]) -> GroupPresentation:
    """Build the group described by the `group` section of a validated run config."""
    section = config["group"]
    base = section.get("basepoint", {})
    basepoint = HalfSpacePoint(_complex(base), float(base.get("height", 1.0))) if base else None
    builtin = section["builtin"]
    if builtin == "trivial":
        return trivial_group(basepoint)
    if builtin == "cylinder":
        group = cylinder_group(float(section["length"]))
    elif builtin == "schottky":
        group = symmetric_schottky_group(float(section["length"]))
    elif builtin == "schottky_circles":
        pairs = [
            (
                (_complex(p["source"]["center"]), float(p["source"]["radius"])),
                (_complex(p["target"]["center"]), float(p["target"]["radius"])),
            )
            for p in section["circles"]
        ]
        return schottky_from_circles(pairs, basepoint=basepoint)
    else:
        gens = [
            (
                gen.get("label", _default_label(idx)),
                Isometry(*(_complex(gen[key]) for key in ("a", "b", "c", "d"))),
            )
            for idx, gen in enumerate(section["generators"])
        ]
        return validate_presentation(gens, basepoint=basepoint, name="inline", params={"builtin": "inline"})
    if basepoint is not None and basepoint != group.basepoint:
        group = replace(group, basepoint=basepoint)
    return group


def generator_steps(group: GroupPresentation) -> np.ndarray:
    """d(o, g o) for every generator g."""
    if group.rank == 0:
        return np.zeros(0)
    mats = np.stack([g.as_array() for _, g in group.generators])
    return orbit_distances(mats, group.basepoint, group.basepoint)


def _breadth_first(
    group: GroupPresentation,
    radius: float,
    extend_limit: float,
    max_length: Optional[int],
    element_cap: int,
) -> Tuple[List[np.ndarray], List[np.ndarray], List[np.ndarray], int, bool]:
    """Level-by-level expansion of reduced words; returns kept (words, mats, dists) per level."""
    o = group.basepoint
    identity = np.eye(2, dtype=np.complex128)[np.newaxis]
    kept_words = [np.zeros((1, 0), dtype=np.int8)]
    kept_mats = [identity]
    kept_dist = [np.zeros(1)]
    kept_total = 1
    frontier_words = kept_words[0]
    frontier_mats = identity
    frontier_last = np.zeros(1, dtype=np.int8)
    explored = 1
    level = 0
    letter_mats = {s: group.letter_matrix(s) for s in group.letters}

    while frontier_mats.shape[0] and (max_length is None or level < max_length):
        level += 1
        level_words, level_mats, level_dist, level_last = [], [], [], []
        for s in group.letters:
            mask = frontier_last != -s
            if not mask.any():
                continue
            mats = frontier_mats[mask] @ letter_mats[s]
            dist = orbit_distances(mats, o, o)
            extend = dist <= extend_limit + ORBIT_TOL
            if not extend.any():
                continue
            parent_words = frontier_words[mask][extend]
            column = np.full((parent_words.shape[0], 1), s, dtype=np.int8)
            level_words.append(np.hstack([parent_words, column]))
            level_mats.append(mats[extend])
            level_dist.append(dist[extend])
            level_last.append(column[:, 0])
        if not level_words:
            break
        frontier_words = np.concatenate(level_words)
        frontier_mats = np.concatenate(level_mats)
        frontier_dist = np.concatenate(level_dist)
        frontier_last = np.concatenate(level_last)
        explored += frontier_mats.shape[0]

        inside = frontier_dist <= radius + ORBIT_TOL
        kept_words.append(frontier_words[inside])
        kept_mats.append(frontier_mats[inside])
        kept_dist.append(frontier_dist[inside])
        kept_total += int(inside.sum())
        logger.debug(
            "level %d: %d extended, %d inside radius %.3f", level, frontier_mats.shape[0], int(inside.sum()), radius
        )
        if kept_total > element_cap or frontier_mats.shape[0] > element_cap:
            return kept_words, kept_mats, kept_dist, explored, True
    return kept_words, kept_mats, kept_dist, explored, False


def _assemble_cache(
    group: GroupPresentation,
    radius: float,
    kept_words: List[np.ndarray],
    kept_mats: List[np.ndarray],
    kept_dist: List[np.ndarray],
    complete: bool,
    explored: int,
) -> OrbitCache:
    width = max(w.shape[1] for w in kept_words)
    words = np.concatenate(
        [np.pad(w, ((0, 0), (0, width - w.shape[1]))) for w in kept_words]
    ).astype(np.int8)
    mats = np.concatenate(kept_mats)
    dist = np.concatenate(kept_dist)
    lengths = np.count_nonzero(words, axis=1)
    keys = tuple(words[:, col] for col in reversed(range(width))) + (lengths, dist)
    order = np.lexsort(keys)
    mats = mats[order]
    return OrbitCache(
        group=group,
        radius=float(radius),
        words=words[order],
        matrices=mats,
        orbit_distance=dist[order],
        displacement=displacement_lengths(mats),
        complete=complete,
        explored=explored,
    )


def enumerate_orbit(
    group: GroupPresentation,
    radius: float,
    element_cap: int = DEFAULT_ELEMENT_CAP,
    prune_slack_steps: float = 1.0,
) -> OrbitCache:
    """
    Breadth-first enumeration of reduced words g with d(o, g o) <= radius.

    A word is extended while its orbit distance is within radius + slack * max_step, where
    max_step = max_g d(o, g o): by the triangle inequality each appended letter moves the orbit
    point by at most max_step. The cache is flagged complete when the slack covers at least one
    full step and the element cap was never reached.
    """
    if not (isinstance(radius, (int, float)) and math.isfinite(radius)) or radius < 0:
        raise DomainError(f"enumeration radius must be >= 0 (got {radius!r})")
    steps = generator_steps(group)
    max_step = float(steps.max()) if steps.size else 0.0
    extend_limit = radius + prune_slack_steps * max_step
    kept_words, kept_mats, kept_dist, explored, capped = _breadth_first(
        group, radius, extend_limit, None, element_cap
    )
    cache = _assemble_cache(
        group, radius, kept_words, kept_mats, kept_dist, complete=not capped and prune_slack_steps >= 1.0,
        explored=explored,
    )
    if capped:
        raise BudgetExceededError(
            f"orbit enumeration of {group.name} exceeded the cap of {element_cap} elements "
            f"before reaching radius {radius}",
            partial=cache,
        )
    _warn_on_coincident_words(cache)
    logger.info(
        "enumerated %s to radius %.3f: %d elements (%d words explored)", group.name, radius, len(cache), explored
    )
    return cache


def brute_force_orbit(group: GroupPresentation, radius: float) -> OrbitCache:
    """
    Unpruned oracle: every reduced word of length <= ceil(radius / min_step), filtered by distance.
    """
    steps = generator_steps(group)
    if not steps.size:
        max_length = 0
    else:
        min_step = float(steps.min())
        max_length = int(math.ceil(radius / min_step)) if min_step > 0 else 0
    kept_words, kept_mats, kept_dist, explored, _ = _breadth_first(
        group, radius, math.inf, max_length, element_cap=np.iinfo(np.int64).max
    )
    return _assemble_cache(group, radius, kept_words, kept_mats, kept_dist, True, explored)


def _warn_on_coincident_words(cache: OrbitCache) -> None:
    short = np.flatnonzero(cache.word_lengths <= COINCIDENCE_MAX_LENGTH)
    if short.size < 2:
        return
    mats = cache.matrices[short].reshape(len(short), 4)
    # Fix the sign ambiguity: make the largest entry have positive real part.
    pivot = mats[np.arange(len(short)), np.argmax(np.abs(mats), axis=1)]
    mats = mats * np.where(pivot.real < 0, -1.0, 1.0)[:, np.newaxis]
    keys = np.round(np.concatenate([mats.real, mats.imag], axis=1) / COINCIDENCE_TOL).astype(np.int64)
    _, counts = np.unique(keys, axis=0, return_counts=True)
    if np.any(counts > 1):
        logger.warning(
            "%s: %d distinct short words share a matrix within %.0e; the group may not be free/discrete",
            cache.group.name,
            int(counts[counts > 1].sum()),
            COINCIDENCE_TOL,
        )


def shortest_displacement(cache: OrbitCache) -> ShortestDisplacement:
    """l0 = min displacement over non-identity elements; certified when radius >= 2 l0."""
    mask = cache.non_identity
    if not mask.any():
        raise InsufficientDataError("cache holds only the identity; l0 is undefined")
    value = float(cache.displacement[mask].min())
    certified = bool(cache.complete and cache.radius >= 2.0 * value)
    if not certified:
        logger.warning("l0=%.6f is not certified by a radius-%.3f cache", value, cache.radius)
    return ShortestDisplacement(value=value, certified=certified)


def count_by_displacement(cache: OrbitCache, radius: float) -> DisplacementCount:
    """N(R) = #{g in cache : l_g <= R}, identity included with l_Id = 0."""
    count = int(np.count_nonzero(cache.displacement <= radius + ORBIT_TOL))
    certified = bool(cache.complete and radius <= cache.radius)
    warning = None
    if not certified:
        warning = f"N({radius:g}) counted on a radius-{cache.radius:g} cache is not certified"
        logger.warning(warning)
    return DisplacementCount(radius=float(radius), count=count, certified=certified, warning=warning)


def shell_counts(cache: OrbitCache, width: float = 1.0, radius: Optional[float] = None) -> pd.DataFrame:
    """Rows (R, shell_count, cumulative_count) at R = 0, w, 2w, ... up to the radius."""
    radius = cache.radius if radius is None else radius
    edges = np.arange(0.0, radius + ORBIT_TOL, width)
    cumulative = np.searchsorted(cache.orbit_distance, edges + ORBIT_TOL, side="right")
    shells = np.diff(np.concatenate([[0], cumulative]))
    return pd.DataFrame({"R": edges, "shell_count": shells, "cumulative_count": cumulative})


def counting_table(cache: OrbitCache, radii: Sequence[float]) -> pd.DataFrame:
    """Orbit counts #{g : d(o, g o) <= R} next to displacement counts N(R) on a radius grid."""
    radii = np.asarray(radii, dtype=float)
    orbit = np.searchsorted(cache.orbit_distance, radii + ORBIT_TOL, side="right")
    lengths = np.sort(cache.displacement)
    census = np.searchsorted(lengths, radii + ORBIT_TOL, side="right")
    return pd.DataFrame(
        {"R": radii, "orbit_count": orbit, "displacement_count": census, "certified": radii <= cache.radius + ORBIT_TOL}
    )


def cache_census(cache: OrbitCache) -> Dict[str, Any]:
    census: Dict[str, Any] = {
        "group": cache.group.name,
        "radius": cache.radius,
        "complete": cache.complete,
        "elements": len(cache),
        "explored": cache.explored,
        "max_distance": float(cache.orbit_distance.max()),
        "max_word_length": int(cache.word_lengths.max()),
        "word_length_histogram": {
            int(length): int(count) for length, count in zip(*np.unique(cache.word_lengths, return_counts=True))
        },
    }
    if cache.non_identity.any():
        l0 = shortest_displacement(cache)
        census["l0"] = l0.value
        census["l0_certified"] = l0.certified
    return census


# Persistence: versioned columnar text, one element per row.

_COLUMNS = [
    "word", "a_re", "a_im", "b_re", "b_im", "c_re", "c_im", "d_re", "d_im",
    "orbit_distance", "displacement",
]


def _pair(value: complex) -> Dict[str, float]:
    return {"re": float(value.real), "im": float(value.imag)}


def _group_header(group: GroupPresentation) -> Dict[str, Any]:
    return {
        "name": group.name,
        "known_delta": group.known_delta,
        "params": group.params,
        "basepoint": {**_pair(group.basepoint.horizontal), "height": group.basepoint.height},
        "generators": [
            {"label": label, "a": _pair(g.a), "b": _pair(g.b), "c": _pair(g.c), "d": _pair(g.d)}
            for label, g in group.generators
        ],
    }


def save_cache(cache: OrbitCache, path: Path, config: Optional[Dict[str, Any]] = None) -> Path:
    """Write the cache: three header lines (format, group, config) then a CSV table."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mats = cache.matrices.reshape(len(cache), 4)
    table = pd.DataFrame(
        {
            "word": [" ".join(str(k) for k in cache.word(i)) for i in range(len(cache))],
            "a_re": mats[:, 0].real, "a_im": mats[:, 0].imag,
            "b_re": mats[:, 1].real, "b_im": mats[:, 1].imag,
            "c_re": mats[:, 2].real, "c_im": mats[:, 2].imag,
            "d_re": mats[:, 3].real, "d_im": mats[:, 3].imag,
            "orbit_distance": cache.orbit_distance,
            "displacement": cache.displacement,
        },
        columns=_COLUMNS,
    )
    header = {
        "format": "orbit-cache",
        "version": CACHE_FORMAT_VERSION,
        "radius": cache.radius,
        "complete": cache.complete,
        "explored": cache.explored,
        "elements": len(cache),
    }
    with path.open("w", encoding="utf-8", newline="") as fp:
        fp.write("# " + json.dumps(header, sort_keys=True) + "\n")
        fp.write("# " + json.dumps(_group_header(cache.group), sort_keys=True) + "\n")
        fp.write("# " + json.dumps(config or {}, sort_keys=True, default=str) + "\n")
        table.to_csv(fp, index=False, float_format="%.17g")
    return path


def load_cache(path: Path, group: Optional[GroupPresentation] = None) -> OrbitCache:
    """Read a cache written by save_cache; rebuilds the group from the header when not given."""
    path = Path(path)
    if not path.exists():
        raise CacheFormatError(f"orbit cache {path} does not exist")
    lines = path.read_text(encoding="utf-8").splitlines(keepends=True)
    try:
        header = json.loads(lines[0].lstrip("# "))
        group_header = json.loads(lines[1].lstrip("# "))
    except (IndexError, json.JSONDecodeError) as exc:
        raise CacheFormatError(f"{path}: malformed cache header") from exc
    if header.get("format") != "orbit-cache" or header.get("version") != CACHE_FORMAT_VERSION:
        raise CacheFormatError(
            f"{path}: unsupported cache format {header.get('format')!r} v{header.get('version')!r}"
        )
    try:
        table = pd.read_csv(io.StringIO("".join(lines[3:])), dtype={"word": str}, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise CacheFormatError(f"{path}: unreadable cache table") from exc
    if list(table.columns) != _COLUMNS or len(table) != header.get("elements"):
        raise CacheFormatError(f"{path}: cache table does not match its header")

    if group is None:
        base = group_header["basepoint"]
        gens = [
            (gen["label"], Isometry(*(_complex(gen[key]) for key in ("a", "b", "c", "d"))))
            for gen in group_header["generators"]
        ]
        basepoint = HalfSpacePoint(_complex(base), base["height"])
        if gens:
            group = validate_presentation(
                gens, basepoint=basepoint, name=group_header["name"],
                known_delta=group_header.get("known_delta"), params=group_header.get("params"),
            )
        else:
            group = trivial_group(basepoint)
    elif group.rank != len(group_header["generators"]):
        raise CacheFormatError(f"{path}: cache was built for {group_header['name']}, not {group.name}")

    parsed = [tuple(int(k) for k in w.split()) for w in table["word"]]
    width = max((len(w) for w in parsed), default=0)
    words = np.zeros((len(parsed), width), dtype=np.int8)
    for row, word in enumerate(parsed):
        words[row, : len(word)] = word
    parts = table[_COLUMNS[1:9]].to_numpy(dtype=float)
    mats = (parts[:, 0::2] + 1j * parts[:, 1::2]).reshape(len(table), 2, 2)
    return OrbitCache(
        group=group,
        radius=float(header["radius"]),
        words=words,
        matrices=mats,
        orbit_distance=table["orbit_distance"].to_numpy(dtype=float),
        displacement=table["displacement"].to_numpy(dtype=float),
        complete=bool(header["complete"]),
        explored=int(header.get("explored", 0)),
    )
