"""Central run configuration for the convex cocompact spectral-measure verifier."""

from __future__ import annotations

import json
import math
from copy import deepcopy
from pathlib import Path
from typing import Any, Dict, List, Optional

from errors import ConfigError


RUN_CONFIG: Dict[str, Any] = {
    "meta": {
        "model_name": "Convex Cocompact Spectral-Measure Verifier",
        "version": "1.0.0",
        "cache_format_version": 1,
    },
    "group": {
        # One of: trivial, cylinder, schottky, schottky_circles, inline.
        "builtin": "cylinder",
        # Translation length of the cylinder generator, or of both symmetric Schottky generators.
        "length": 1.0,
        # schottky_circles: [{"source": {"center": {"re", "im"}, "radius"}, "target": {...}}, ...]
        "circles": [],
        # inline: [{"label": "a", "a": {"re", "im"}, "b": {...}, "c": {...}, "d": {...}}, ...]
        "generators": [],
        "basepoint": {"re": 0.0, "im": 0.0, "height": 1.0},
    },
    "enumeration": {
        "radius": 14.0,
        # Assumption: exponential orbit growth must be budgeted explicitly.
        "element_cap": 5_000_000,
        # Words are still extended while orbit_distance <= radius + slack * max generator step.
        "prune_slack_steps": 1.0,
    },
    "exponent": {
        # Assumption: shorter radii leave too few shells for a growth fit.
        "min_radius": 8.0,
        "shell_width": 1.0,
        # Fraction of the certified range (outermost part) used by the slope fit.
        "fit_fraction": 0.5,
        "margin": 0.1,
        "confidence": 0.95,
        "s_grid": [0.1, 0.25, 0.5, 0.75, 0.9, 1.25, 1.5],
        # Radius used by the delta subcommand for cyclic groups, whose counts grow only linearly.
        "elementary_radius": 40.0,
        # Radius used for non-elementary groups; shorter caches leave the slope and bisection fits apart.
        "nonelementary_radius": 18.0,
    },
    "spectral": {
        # Hyperbolic dimension n of H^{n+1}; only n = 2 has a closed-form kernel.
        "dimension_n": 2,
        "lambda_min": 1.0,
        "lambda_max": 50.0,
        "lambda_points": 12,
        "j_set": [0, 2],
        "extended_j_set": [1, 2, 3],
        "s_override": None,
        "kernel_lambdas": [1.0, 5.0, 25.0],
        "kernel_j": [0, 1, 2],
    },
    "model_bounds": {
        "lambda_min": 1.0,
        "lambda_max": 100.0,
        "lambda_points": 40,
        "r_max": 20.0,
        "r_points": 80,
        "l0_values": [0.5, 1.0, 2.0],
        "slope_tol": 0.05,
    },
    "pairs": {
        "count": 12,
        "d_min": 0.05,
        "d_max": 6.0,
    },
    "verify": {
        # Assumption: oscillatory cancellation in orbit sums makes fitted slopes noisier.
        "slope_tol": 0.1,
        "truncation_factor": 2.0,
        # Lemma check uses displacement lengths above lemma_radius_factor * l0.
        "lemma_radius_factor": 2.0,
        "derivative_rel_tol": 1e-6,
        "derivative_step": 1e-5,
    },
    "counterexample": {
        "lambda": 1.0,
        "length": 1.0,
        "offset": 0.0,
        "k_grid": [1_000, 10_000, 100_000, 1_000_000],
        "expected_slope": [1.45, 1.55],
    },
    "runtime": {
        "threads": 1,
        "seed": 20240917,
    },
    "outputs": {
        "dir": "outputs",
        "cache": "outputs/orbit_cache.txt",
    },
}

BUILTIN_GROUPS = ("trivial", "cylinder", "schottky", "schottky_circles", "inline")

# Isometric circles of the symmetric Schottky group are tangent at this translation length.
SCHOTTKY_TANGENCY_LENGTH = math.log(3.0 + 2.0 * math.sqrt(2.0))


def _merge_overrides(config: Dict[str, Any], overrides: Dict[str, Any]) -> None:
    """Recursively merge overrides into config in-place."""
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(config.get(key), dict):
            _merge_overrides(config[key], value)
        else:
            config[key] = value


def load_config(path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Return a deep copy of the defaults with file and programmatic overrides applied.

    A config file is JSON; its settings live either under an `overrides` key or at the top level.
    Validation is a separate step (`validate_config`) so that callers can still adjust fields.
    """
    config = deepcopy(RUN_CONFIG)
    config["meta"]["config_source"] = "defaults"
    if path is not None:
        path = Path(path)
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError([f"cannot read config {path}: {exc}"]) from exc
        if not isinstance(payload, dict):
            raise ConfigError([f"config {path} must hold a JSON object"])
        file_overrides = payload.get("overrides", payload)
        if not isinstance(file_overrides, dict):
            raise ConfigError([f"`overrides` in {path} must be an object"])
        _merge_overrides(config, file_overrides)
        config["meta"]["config_source"] = str(path)
    if overrides:
        _merge_overrides(config, overrides)
    return config


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _is_complex_pair(value: Any) -> bool:
    return isinstance(value, dict) and _is_number(value.get("re")) and _is_number(value.get("im"))


def _require_positive(section: Dict[str, Any], key: str, where: str, problems: List[str]) -> None:
    value = section.get(key)
    if not _is_number(value) or value <= 0:
        problems.append(f"{where}.{key} must be a positive number (got {value!r})")


def _require_int(section: Dict[str, Any], key: str, where: str, problems: List[str], minimum: int = 1) -> None:
    value = section.get(key)
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        problems.append(f"{where}.{key} must be an integer >= {minimum} (got {value!r})")


def _validate_group(group: Dict[str, Any], problems: List[str]) -> None:
    builtin = group.get("builtin")
    if builtin not in BUILTIN_GROUPS:
        problems.append(f"group.builtin must be one of {BUILTIN_GROUPS} (got {builtin!r})")
        return
    if builtin in ("cylinder", "schottky"):
        _require_positive(group, "length", "group", problems)
    if builtin == "schottky" and _is_number(group.get("length")) and group["length"] <= SCHOTTKY_TANGENCY_LENGTH:
        problems.append(
            f"group.length must exceed {SCHOTTKY_TANGENCY_LENGTH:.6f} for disjoint Schottky circles"
        )
    if builtin == "schottky_circles":
        circles = group.get("circles")
        if not isinstance(circles, list) or not circles:
            problems.append("group.circles must be a nonempty list of circle pairings")
        else:
            for idx, pairing in enumerate(circles):
                for side in ("source", "target"):
                    disk = pairing.get(side) if isinstance(pairing, dict) else None
                    if not isinstance(disk, dict) or not _is_complex_pair(disk.get("center")):
                        problems.append(f"group.circles[{idx}].{side}.center must be a {{re, im}} pair")
                    elif not _is_number(disk.get("radius")) or disk["radius"] <= 0:
                        problems.append(f"group.circles[{idx}].{side}.radius must be positive")
    if builtin == "inline":
        generators = group.get("generators")
        if not isinstance(generators, list) or not generators:
            problems.append("group.generators must be a nonempty list for builtin=inline")
        else:
            for idx, gen in enumerate(generators):
                if not isinstance(gen, dict):
                    problems.append(f"group.generators[{idx}] must be an object")
                    continue
                for entry in ("a", "b", "c", "d"):
                    if not _is_complex_pair(gen.get(entry)):
                        problems.append(f"group.generators[{idx}].{entry} must be a {{re, im}} pair")
    basepoint = group.get("basepoint", {})
    if not isinstance(basepoint, dict) or not _is_complex_pair(basepoint):
        problems.append("group.basepoint must hold finite re/im coordinates")
    elif not _is_number(basepoint.get("height")) or basepoint["height"] <= 0:
        problems.append("group.basepoint.height must be positive")


def _validate_grid(section: Dict[str, Any], where: str, problems: List[str]) -> None:
    _require_positive(section, "lambda_min", where, problems)
    _require_positive(section, "lambda_max", where, problems)
    _require_int(section, "lambda_points", where, problems)
    lo, hi = section.get("lambda_min"), section.get("lambda_max")
    if _is_number(lo) and _is_number(hi) and hi < lo:
        problems.append(f"{where}.lambda_max must be >= lambda_min")


def _validate_orders(values: Any, where: str, problems: List[str]) -> None:
    if not isinstance(values, list) or not values:
        problems.append(f"{where} must be a nonempty list of derivative orders")
        return
    for value in values:
        if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value <= 4:
            problems.append(f"{where} entries must be integers in 0..4 (got {value!r})")


def validate_config(config: Dict[str, Any]) -> Dict[str, Any]:
    """Check every field before any computation; raise ConfigError listing all problems."""
    problems: List[str] = []
    for section in RUN_CONFIG:
        if not isinstance(config.get(section), dict):
            problems.append(f"missing section `{section}`")
    if problems:
        raise ConfigError(problems)

    _validate_group(config["group"], problems)

    enumeration = config["enumeration"]
    radius = enumeration.get("radius")
    if not _is_number(radius) or radius < 0:
        problems.append(f"enumeration.radius must be a nonnegative number (got {radius!r})")
    _require_int(enumeration, "element_cap", "enumeration", problems)
    slack = enumeration.get("prune_slack_steps")
    if not _is_number(slack) or slack < 0:
        problems.append("enumeration.prune_slack_steps must be >= 0")

    exponent = config["exponent"]
    for key in ("min_radius", "shell_width", "margin", "elementary_radius", "nonelementary_radius"):
        _require_positive(exponent, key, "exponent", problems)
    fraction = exponent.get("fit_fraction")
    if not _is_number(fraction) or not 0 < fraction <= 1:
        problems.append("exponent.fit_fraction must lie in (0, 1]")
    confidence = exponent.get("confidence")
    if not _is_number(confidence) or not 0 < confidence < 1:
        problems.append("exponent.confidence must lie in (0, 1)")
    s_grid = exponent.get("s_grid")
    if not isinstance(s_grid, list) or not s_grid or not all(_is_number(s) and s > 0 for s in s_grid):
        problems.append("exponent.s_grid must be a nonempty list of positive numbers")

    spectral = config["spectral"]
    if spectral.get("dimension_n") != 2:
        problems.append("spectral.dimension_n must be 2 (closed-form kernel on H^3 only)")
    _validate_grid(spectral, "spectral", problems)
    _validate_orders(spectral.get("j_set"), "spectral.j_set", problems)
    _validate_orders(spectral.get("extended_j_set"), "spectral.extended_j_set", problems)
    _validate_orders(spectral.get("kernel_j"), "spectral.kernel_j", problems)
    s_override = spectral.get("s_override")
    if s_override is not None and (not _is_number(s_override) or not 0 < s_override < 1):
        problems.append("spectral.s_override must be null or lie in (0, n/2) = (0, 1)")
    kernel_lambdas = spectral.get("kernel_lambdas")
    if not isinstance(kernel_lambdas, list) or not kernel_lambdas or not all(
        _is_number(v) and v >= 0 for v in kernel_lambdas
    ):
        problems.append("spectral.kernel_lambdas must be a nonempty list of nonnegative numbers")

    model = config["model_bounds"]
    _validate_grid(model, "model_bounds", problems)
    _require_positive(model, "r_max", "model_bounds", problems)
    _require_int(model, "r_points", "model_bounds", problems)
    _require_positive(model, "slope_tol", "model_bounds", problems)
    l0_values = model.get("l0_values")
    if not isinstance(l0_values, list) or not l0_values or not all(_is_number(v) and v > 0 for v in l0_values):
        problems.append("model_bounds.l0_values must be a nonempty list of positive numbers")

    pairs = config["pairs"]
    _require_int(pairs, "count", "pairs", problems)
    _require_positive(pairs, "d_min", "pairs", problems)
    _require_positive(pairs, "d_max", "pairs", problems)
    if _is_number(pairs.get("d_min")) and _is_number(pairs.get("d_max")) and pairs["d_max"] < pairs["d_min"]:
        problems.append("pairs.d_max must be >= pairs.d_min")

    verify = config["verify"]
    for key in ("slope_tol", "lemma_radius_factor", "derivative_rel_tol", "derivative_step"):
        _require_positive(verify, key, "verify", problems)
    factor = verify.get("truncation_factor")
    if not _is_number(factor) or factor <= 1:
        problems.append("verify.truncation_factor must be > 1")

    counter = config["counterexample"]
    for key in ("lambda", "length"):
        _require_positive(counter, key, "counterexample", problems)
    if not _is_number(counter.get("offset")):
        problems.append("counterexample.offset must be a finite number")
    k_grid = counter.get("k_grid")
    if (
        not isinstance(k_grid, list)
        or len(k_grid) < 4
        or not all(isinstance(k, int) and not isinstance(k, bool) and k >= 1 for k in k_grid)
        or any(b <= a for a, b in zip(k_grid, k_grid[1:]))
    ):
        problems.append("counterexample.k_grid must be >= 4 increasing positive integers")
    window = counter.get("expected_slope")
    if not isinstance(window, list) or len(window) != 2 or not all(_is_number(v) for v in window):
        problems.append("counterexample.expected_slope must be a [low, high] pair")

    runtime = config["runtime"]
    _require_int(runtime, "threads", "runtime", problems)
    _require_int(runtime, "seed", "runtime", problems, minimum=0)

    if problems:
        raise ConfigError(problems)
    return config
