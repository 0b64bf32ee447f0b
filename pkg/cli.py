#!/usr/bin/env python3
"""Command-line front end: enumerate orbits, estimate delta, sum kernels and run the verification suites."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config_loader import load_config, validate_config
from errors import (
    BudgetExceededError,
    CacheFormatError,
    ConfigError,
    DomainError,
    HypothesisViolationError,
    InsufficientDataError,
    InvalidGroupError,
    PrecisionError,
    SpectralVerifierError,
    UnsupportedOrderError,
)
from exponent import (
    BISECTION,
    SLOPE,
    ExponentEstimate,
    conjugation_bound_check,
    estimate_delta,
    gate,
    partial_sum_growth,
    poincare_partial,
    series_table,
)
from images import automorphic_kernel, resolve_s
from kleinian import (
    GroupPresentation,
    OrbitCache,
    cache_census,
    counting_table,
    enumerate_orbit,
    group_from_config,
    load_cache,
    save_cache,
    shell_counts,
)
from specmeas import KernelQuery
from verify import (
    check_abstract_hypothesis,
    check_derivatives,
    check_lemma_distance,
    check_model_bounds,
    check_truncation,
    divergence_test,
    lemma_stability,
    log_lambda_grid,
    report_to_csv,
    report_to_json,
    sample_pairs,
    summarize_reports,
)

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_GATE = 2
EXIT_BUDGET = 3
EXIT_INPUT = 4

# Acceptance checks around delta_hat for the Poincare series.
REGIME_OFFSET = 0.3
GROWTH_REL_TOL = 0.25
LEMMA_STEP = 2.0
LEMMA_REL_TOL = 0.05
DERIVATIVE_R_RANGE = (0.01, 10.0)

CommandResult = Tuple[int, Dict[str, Any]]


def _dirs(config: Dict[str, Any]) -> Tuple[Path, Path]:
    out = Path(config["outputs"]["dir"])
    tables, reports = out / "tables", out / "reports"
    tables.mkdir(parents=True, exist_ok=True)
    reports.mkdir(parents=True, exist_ok=True)
    return tables, reports


def _same_group(a: GroupPresentation, b: GroupPresentation) -> bool:
    if a.rank != b.rank or a.basepoint != b.basepoint:
        return False
    return all(np.allclose(g.as_array(), h.as_array(), atol=1e-12) for (_, g), (_, h) in zip(a.generators, b.generators))


def _load_matching_cache(config: Dict[str, Any], group: GroupPresentation) -> OrbitCache:
    path = Path(config["outputs"]["cache"])
    cache = load_cache(path)
    if not _same_group(cache.group, group):
        raise CacheFormatError(f"{path} holds {cache.group.name}, not the configured {group.name}; re-run enumerate")
    return replace(cache, group=group)


def _delta_estimates(
    config: Dict[str, Any], group: GroupPresentation, cache: OrbitCache
) -> Tuple[Dict[str, ExponentEstimate], Optional[ExponentEstimate]]:
    """Both estimates, plus the one with the larger upper end (used for the gate and for s)."""
    if group.rank == 0:
        return {}, None
    settings = config["exponent"]
    # Cyclic groups grow linearly; their counts need a much longer range to flatten.
    radius = settings["elementary_radius"] if group.rank == 1 else settings["nonelementary_radius"]
    sample = cache
    if cache.radius < radius:
        logger.info("re-enumerating %s to radius %.1f for the exponent fits", group.name, radius)
        sample = enumerate_orbit(group, radius, config["enumeration"]["element_cap"])
    estimates = {
        method: estimate_delta(
            sample,
            method,
            min_radius=settings["min_radius"],
            fit_fraction=settings["fit_fraction"],
            shell_width=settings["shell_width"],
            confidence=settings["confidence"],
        )
        for method in (SLOPE, BISECTION)
    }
    return estimates, max(estimates.values(), key=lambda e: e.upper)


def _pairs(config: Dict[str, Any], group: GroupPresentation, cache: OrbitCache):
    window = config["pairs"]
    return sample_pairs(group, cache, window["count"], window["d_min"], window["d_max"], config["runtime"]["seed"])


def cmd_enumerate(config: Dict[str, Any]) -> CommandResult:
    """Enumerate the orbit to the configured radius, persist the cache and print its census."""
    tables, reports = _dirs(config)
    group = group_from_config(config)
    settings = config["enumeration"]
    cache_path = Path(config["outputs"]["cache"])
    try:
        cache = enumerate_orbit(group, settings["radius"], settings["element_cap"], settings["prune_slack_steps"])
        code = EXIT_PASS
    except BudgetExceededError as exc:
        cache = exc.partial
        code = EXIT_BUDGET
        logger.error("%s; persisting the partial cache", exc)
    save_cache(cache, cache_path, config)
    census = cache_census(cache)
    shell_counts(cache, config["exponent"]["shell_width"]).to_csv(tables / "shell_counts.csv", index=False)
    payload = {"check": "enumerate", "group": group.name, "census": census, "cache": str(cache_path)}
    report_to_json(payload, reports / "enumerate.json", config)

    print(f"=== ORBIT ENUMERATION: {group.name} ===")
    print(f"Radius T: {cache.radius:g} (complete: {cache.complete})")
    print(f"Elements: {census['elements']:,} ({census['explored']:,} words explored)")
    if "l0" in census:
        print(f"Shortest displacement l0: {census['l0']:.6f} (certified: {census['l0_certified']})")
    print(f"Max orbit distance: {census['max_distance']:.4f}")
    print(f"Cache: {cache_path}")
    return code, payload


def cmd_delta(config: Dict[str, Any]) -> CommandResult:
    tables, reports = _dirs(config)
    group = group_from_config(config)
    cache = _load_matching_cache(config, group)
    counting_table(cache, np.arange(0.0, cache.radius + 1e-9, config["exponent"]["shell_width"])).to_csv(
        tables / "counting.csv", index=False
    )
    estimates, chosen = _delta_estimates(config, group, cache)
    payload: Dict[str, Any] = {"check": "delta", "group": group.name, "known_delta": group.known_delta}
    print(f"=== CRITICAL EXPONENT: {group.name} ===")
    if chosen is None:
        payload.update({"status": "PASS", "estimates": {}, "gate": "known"})
        report_to_json(payload, reports / "delta.json", config)
        print(f"Known delta: {group.known_delta}")
        return EXIT_PASS, payload

    slope, bisection = estimates[SLOPE], estimates[BISECTION]
    payload["estimates"] = {name: est.as_dict() for name, est in estimates.items()}
    payload["agreement"] = {
        "difference": abs(slope.delta_hat - bisection.delta_hat),
        "combined_confidence": slope.confidence + bisection.confidence,
        "agree": abs(slope.delta_hat - bisection.delta_hat) <= slope.confidence + bisection.confidence,
    }
    payload["chosen_method"] = chosen.method
    for est in estimates.values():
        print(f"{est.method:>9}: delta_hat = {est.delta_hat:.4f} +- {est.confidence:.4f} (T = {est.radius:g})")
    try:
        gate(chosen, config["spectral"]["dimension_n"])
    except HypothesisViolationError as exc:
        payload.update({"status": "REFUSED", "gate": str(exc)})
        report_to_json(payload, reports / "delta.json", config)
        print(f"Gate: REFUSED ({exc})")
        return EXIT_GATE, payload
    payload.update({"status": "PASS", "gate": "passed"})
    report_to_json(payload, reports / "delta.json", config)
    print(f"Gate: delta_hat + CI = {chosen.upper:.4f} < n/2 = {config['spectral']['dimension_n'] / 2:g}")
    return EXIT_PASS, payload


def _stabilization_check(cache: OrbitCache, estimate: ExponentEstimate) -> Dict[str, Any]:
    o = cache.group.basepoint
    s = estimate.delta_hat + REGIME_OFFSET
    full = poincare_partial(cache, s, o, o, delta_hat=estimate.delta_hat)
    earlier = poincare_partial(cache.truncated(cache.radius - 2.0), s, o, o, delta_hat=estimate.delta_hat)
    change = full.partial_sum - earlier.partial_sum
    bound = earlier.tail_estimate if earlier.tail_estimate is not None else math.inf
    return {"s": s, "change": change, "tail_estimate": bound, "stable": bool(abs(change) <= bound)}


def _growth_check(cache: OrbitCache, estimate: ExponentEstimate) -> Optional[Dict[str, Any]]:
    s = estimate.delta_hat - REGIME_OFFSET
    if s <= 0:
        return None
    o = cache.group.basepoint
    rate = partial_sum_growth(cache, s, o, o)
    expected = estimate.delta_hat - s
    return {
        "s": s,
        "fitted_rate": rate,
        "expected_rate": expected,
        "within_tolerance": bool(abs(rate - expected) <= GROWTH_REL_TOL * expected),
    }


def cmd_poincare(config: Dict[str, Any]) -> CommandResult:
    tables, reports = _dirs(config)
    group = group_from_config(config)
    cache = _load_matching_cache(config, group)
    _, estimate = _delta_estimates(config, group, cache)
    delta_hat = estimate.delta_hat if estimate is not None else group.known_delta
    o = group.basepoint
    table = series_table(cache, config["exponent"]["s_grid"], o, o, delta_hat=delta_hat, margin=config["exponent"]["margin"])
    table.to_csv(tables / "poincare_series.csv", index=False)

    pairs = _pairs(config, group, cache)
    conjugation = [conjugation_bound_check(cache, s, p.x, p.y) for s in config["exponent"]["s_grid"] for p in pairs[:3]]
    checks_ok = all(row["holds"] for row in conjugation)
    regime_checks: Dict[str, Any] = {}
    if estimate is not None:
        regime_checks["stabilization"] = _stabilization_check(cache, estimate)
        growth = _growth_check(cache, estimate)
        if growth is not None:
            regime_checks["growth"] = growth
        checks_ok = checks_ok and regime_checks["stabilization"]["stable"] and (growth is None or growth["within_tolerance"])
    payload = {
        "check": "poincare",
        "group": group.name,
        "status": "PASS" if checks_ok else "FAIL",
        "delta_hat": delta_hat,
        "conjugation_bound_holds": all(row["holds"] for row in conjugation),
        "regime_checks": regime_checks,
        "rows": len(table),
    }
    report_to_json(payload, reports / "poincare.json", config)
    print(f"=== POINCARE SERIES: {group.name} (T = {cache.radius:g}) ===")
    print(table[["s", "partial_sum", "tail_estimate", "regime"]].to_string(index=False))
    for name, outcome in regime_checks.items():
        print(f"{name}: {outcome}")
    return (EXIT_PASS if checks_ok else EXIT_FAIL), payload


def cmd_kernel(config: Dict[str, Any]) -> CommandResult:
    tables, reports = _dirs(config)
    group = group_from_config(config)
    cache = _load_matching_cache(config, group)
    _, estimate = _delta_estimates(config, group, cache)
    if estimate is not None:
        gate(estimate, config["spectral"]["dimension_n"])
    s_used, _ = resolve_s(group, config["spectral"]["s_override"], estimate)
    pairs = _pairs(config, group, cache)
    rows: List[Dict[str, Any]] = []
    for lam in config["spectral"]["kernel_lambdas"]:
        for j in config["spectral"]["kernel_j"]:
            for index, pair in enumerate(pairs):
                kv = automorphic_kernel(group, cache, KernelQuery(lam, pair.distance, j), pair.x, pair.y, s=s_used, estimate=estimate)
                rows.append({"pair": index, **kv.as_dict()})
    table = pd.DataFrame(rows)
    table.to_csv(tables / "kernel_values.csv", index=False)
    payload = {
        "check": "kernel",
        "group": group.name,
        "status": "PASS",
        "s_used": s_used,
        "evaluations": len(table),
        "max_tail_bound": float(table["tail_bound"].max()),
    }
    report_to_json(payload, reports / "kernel.json", config)
    print(f"=== AUTOMORPHIC KERNEL: {group.name} (s = {s_used:.4f}) ===")
    print(table.groupby(["lambda", "j"])[["value", "tail_bound"]].max().to_string())
    return EXIT_PASS, payload


def cmd_verify(config: Dict[str, Any]) -> CommandResult:
    """Model-space suites, then the group suites (refused when the critical exponent gate fails)."""
    tables, reports = _dirs(config)
    threads = config["runtime"]["threads"]
    model = config["model_bounds"]
    verify_cfg = config["verify"]
    model_lambdas = log_lambda_grid(model["lambda_min"], model["lambda_max"], model["lambda_points"])
    radii = np.linspace(model["r_max"] / model["r_points"], model["r_max"], model["r_points"])
    results = []
    for l0 in model["l0_values"]:
        report = check_model_bounds(l0, model_lambdas, radii, slope_tol=model["slope_tol"])
        report_to_json(report, reports / f"model_bounds_l0_{l0:g}.json", config)
        results.append(report)
    derivative_radii = np.linspace(*DERIVATIVE_R_RANGE, model["r_points"])
    spectral = config["spectral"]
    derivative_lambdas = log_lambda_grid(spectral["lambda_min"], spectral["lambda_max"], model["lambda_points"])
    derivatives = check_derivatives(
        derivative_lambdas,
        derivative_radii,
        step=verify_cfg["derivative_step"],
        rel_tol=verify_cfg["derivative_rel_tol"],
    )
    report_to_json(derivatives, reports / "derivatives.json", config)
    results.append(derivatives)

    group = group_from_config(config)
    cache = _load_matching_cache(config, group)
    _, estimate = _delta_estimates(config, group, cache)
    lambdas = log_lambda_grid(spectral["lambda_min"], spectral["lambda_max"], spectral["lambda_points"])
    pairs = _pairs(config, group, cache)
    try:
        hypothesis = check_abstract_hypothesis(
            group,
            cache,
            lambdas,
            pairs,
            estimate=estimate,
            j_set=spectral["j_set"],
            extended_j_set=spectral["extended_j_set"],
            slope_tol=verify_cfg["slope_tol"],
            s=spectral["s_override"],
            threads=threads,
            seed=config["runtime"]["seed"],
        )
    except HypothesisViolationError as exc:
        payload = {"check": "verify", "group": group.name, "status": "REFUSED", "gate": str(exc), "diagnostics": exc.diagnostics}
        report_to_json(payload, reports / "verify_summary.json", config)
        print(f"Verification refused: {exc}")
        return EXIT_GATE, payload
    report_to_json(hypothesis, reports / "abstract_hypothesis.json", config)
    report_to_csv(hypothesis, tables / "abstract_hypothesis_cells.csv")
    results.append(hypothesis)

    truncation = check_truncation(
        group,
        cache,
        lambdas,
        pairs,
        j_set=sorted(set(spectral["kernel_j"])),
        factor=verify_cfg["truncation_factor"],
        estimate=estimate,
        s=spectral["s_override"],
        threads=threads,
    )
    report_to_json(truncation, reports / "truncation.json", config)
    report_to_csv(truncation, tables / "truncation.csv")
    results.append(truncation)

    lemma = check_lemma_distance(group, cache, pairs, verify_cfg["lemma_radius_factor"])
    lemma.metrics["stability"] = lemma_stability(
        group, cache, pairs, verify_cfg["lemma_radius_factor"], step=LEMMA_STEP, rel_tol=LEMMA_REL_TOL
    )
    report_to_json(lemma, reports / "lemma_distance.json", config)
    results.append(lemma)

    summary = summarize_reports(results)
    summary.to_csv(tables / "verify_summary.csv", index=False)
    passed = bool(summary["passed"].all())
    payload = {
        "check": "verify",
        "group": group.name,
        "status": "PASS" if passed else "FAIL",
        "summary": summary.to_dict(orient="records"),
    }
    report_to_json(payload, reports / "verify_summary.json", config)
    print(f"=== VERIFICATION SUITE: {group.name} ===")
    print(summary.to_string(index=False))
    print(f"Abstract hypothesis slopes: {hypothesis.slopes}")
    return (EXIT_PASS if passed else EXIT_FAIL), payload


def cmd_counterexample(config: Dict[str, Any]) -> CommandResult:
    tables, reports = _dirs(config)
    counter = config["counterexample"]
    window = tuple(counter["expected_slope"])
    main = divergence_test(
        counter["lambda"], counter["length"], counter["k_grid"], j=1, offset=counter["offset"], expected=window,
        slope_tol=config["verify"]["slope_tol"],
    )
    control = divergence_test(
        counter["lambda"], counter["length"], counter["k_grid"], j=0, offset=counter["offset"],
        expected=(window[0] - 1.0, window[1] - 1.0), slope_tol=config["verify"]["slope_tol"],
    )
    report_to_json(main, reports / "counterexample.json", config)
    report_to_csv(main, tables / "counterexample_partial_sums.csv")
    payload = {
        "check": "counterexample",
        "status": main.as_dict()["status"],
        "slope_j1": main.metrics["slope"],
        "slope_j0": control.metrics["slope"],
    }
    report_to_json(payload, reports / "counterexample_summary.json", config)
    print("=== FLAT CYLINDER NEGATIVE CONTROL ===")
    print(f"j = 1 log-log slope: {main.metrics['slope']:.4f} -> {payload['status']}")
    print(f"j = 0 log-log slope: {control.metrics['slope']:.4f}")
    return (EXIT_PASS if main.passed else EXIT_FAIL), payload


COMMANDS: Dict[str, Callable[[Dict[str, Any]], CommandResult]] = {
    "enumerate": cmd_enumerate,
    "delta": cmd_delta,
    "poincare": cmd_poincare,
    "kernel": cmd_kernel,
    "verify": cmd_verify,
    "counterexample": cmd_counterexample,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Spectral-measure verifier for convex cocompact quotients of H^3.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    parser.add_argument("--cache", type=Path, help="Orbit cache file")
    parser.add_argument("--out", type=Path, help="Output directory")
    parser.add_argument("--threads", type=int, help="Worker processes for lambda sweeps")
    parser.add_argument("--budget", type=int, help="Element cap for orbit enumeration")
    parser.add_argument("--seed", type=int, help="Seed for sample-pair placement")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    return parser


def _flag_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if args.out is not None:
        overrides.setdefault("outputs", {})["dir"] = str(args.out)
        if args.cache is None:
            overrides["outputs"]["cache"] = str(args.out / "orbit_cache.txt")
    if args.cache is not None:
        overrides.setdefault("outputs", {})["cache"] = str(args.cache)
    if args.threads is not None:
        overrides.setdefault("runtime", {})["threads"] = args.threads
    if args.seed is not None:
        overrides.setdefault("runtime", {})["seed"] = args.seed
    if args.budget is not None:
        overrides.setdefault("enumeration", {})["element_cap"] = args.budget
    return overrides


def run_command(name: str, config: Dict[str, Any]) -> CommandResult:
    """Validate, then dispatch; every library error maps onto the exit-code contract."""
    try:
        validate_config(config)
        return COMMANDS[name](config)
    except HypothesisViolationError as exc:
        logger.error("hypothesis gate: %s", exc)
        return EXIT_GATE, {"check": name, "status": "REFUSED", "error": str(exc)}
    except BudgetExceededError as exc:
        logger.error("%s", exc)
        return EXIT_BUDGET, {"check": name, "status": "BUDGET", "error": str(exc)}
    except (
        ConfigError,
        CacheFormatError,
        DomainError,
        InvalidGroupError,
        InsufficientDataError,
        PrecisionError,
        UnsupportedOrderError,
    ) as exc:
        logger.error("invalid input: %s", exc)
        return EXIT_INPUT, {"check": name, "status": "INVALID", "error": str(exc)}
    except SpectralVerifierError as exc:
        logger.error("%s failed: %s", name, exc)
        return EXIT_FAIL, {"check": name, "status": "FAIL", "error": str(exc)}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config, overrides=_flag_overrides(args))
    except ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_INPUT
    code, _ = run_command(args.command, config)
    return code


if __name__ == "__main__":
    sys.exit(main())
