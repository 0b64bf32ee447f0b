#!/usr/bin/env python3
"""Project-wide quality gate for verifier artifacts: tables, reports and their internal consistency."""

from __future__ import annotations

import argparse
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Tuple

import pandas as pd

ROOT = Path(__file__).resolve().parents[1]

REQUIRED_TABLES = [
    "shell_counts.csv",
    "counting.csv",
    "poincare_series.csv",
    "kernel_values.csv",
    "abstract_hypothesis_cells.csv",
    "truncation.csv",
    "verify_summary.csv",
    "counterexample_partial_sums.csv",
]
REQUIRED_REPORTS = [
    "enumerate.json",
    "delta.json",
    "poincare.json",
    "kernel.json",
    "abstract_hypothesis.json",
    "truncation.json",
    "lemma_distance.json",
    "derivatives.json",
    "counterexample.json",
]


def check(condition: bool, ok_msg: str, fail_msg: str, failures: List[str]) -> None:
    if condition:
        print(f"[OK]   {ok_msg}")
    else:
        print(f"[FAIL] {fail_msg}")
        failures.append(fail_msg)


def _read_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path) if path.exists() else pd.DataFrame()


def _read_report(path: Path) -> Dict[str, Any]:
    if not path.exists():
        return {}
    return json.loads(path.read_text(encoding="utf-8"))


def check_outputs(out: Path, failures: List[str]) -> None:
    for table in REQUIRED_TABLES:
        path = out / "tables" / table
        check(path.exists(), f"Table exists: {table}", f"Missing table: {table}", failures)
        if path.exists():
            check(len(pd.read_csv(path)) > 0, f"Table has rows: {table}", f"Empty table: {table}", failures)
    for report in REQUIRED_REPORTS:
        payload = _read_report(out / "reports" / report)
        check(bool(payload), f"Report exists: {report}", f"Missing report: {report}", failures)
        if payload:
            check(
                "artifact_version" in payload and "config" in payload,
                f"Report carries version and config: {report}",
                f"Report lacks version or embedded config: {report}",
                failures,
            )


def check_counting(out: Path, failures: List[str]) -> None:
    counts = _read_csv(out / "tables" / "counting.csv")
    if counts.empty:
        return
    check(
        counts["orbit_count"].is_monotonic_increasing,
        "Orbit counts nondecreasing in R",
        "Orbit counts decrease somewhere in R",
        failures,
    )
    check(
        bool((counts["orbit_count"] >= 1).all()),
        "Identity present in every orbit count",
        "Orbit count below 1 detected",
        failures,
    )


def check_kernel_values(out: Path, failures: List[str]) -> None:
    kernel = _read_csv(out / "tables" / "kernel_values.csv")
    if kernel.empty:
        return
    check(
        bool(kernel["value"].map(math.isfinite).all()),
        "Kernel values finite",
        "Non-finite kernel values detected",
        failures,
    )
    check(
        bool((kernel["tail_bound"] >= 0).all()),
        "Tail bounds nonnegative",
        "Negative tail bounds detected",
        failures,
    )


def check_truncation(out: Path, failures: List[str]) -> None:
    rows = _read_csv(out / "tables" / "truncation.csv")
    if rows.empty:
        return
    check(
        bool(rows["sound"].all()),
        "Truncation changes stay inside tail bounds",
        f"{int((~rows['sound']).sum())} truncation changes exceed their tail bound",
        failures,
    )


def check_counterexample(out: Path, failures: List[str]) -> None:
    report = _read_report(out / "reports" / "counterexample.json").get("report", {})
    if not report:
        return
    check(
        report.get("status") == "FAIL-as-expected",
        "Flat-cylinder control fails as expected",
        f"Flat-cylinder control status: {report.get('status')}",
        failures,
    )


def run_quality_gate(out: Path, strict: bool = False) -> Tuple[bool, List[str]]:
    failures: List[str] = []

    print(f"=== Quality Gate: Spectral-Measure Verifier ({out}) ===")
    check_outputs(out, failures)
    check_counting(out, failures)
    check_kernel_values(out, failures)
    check_truncation(out, failures)
    check_counterexample(out, failures)

    if failures:
        print("\nQuality Gate Result: FAILED")
        for item in failures:
            print(f"- {item}")
        return False, failures

    print("\nQuality Gate Result: PASSED")
    return True, failures


def main() -> None:
    parser = argparse.ArgumentParser(description="Run quality gate checks on verifier outputs.")
    parser.add_argument("--out", default="outputs", help="Output directory to inspect")
    parser.add_argument("--strict", action="store_true", help="Exit with non-zero status on failures")
    args = parser.parse_args()

    out = Path(args.out)
    if not out.is_absolute():
        out = ROOT / out
    ok, _ = run_quality_gate(out, strict=args.strict)
    if not ok and args.strict:
        raise SystemExit(1)


if __name__ == "__main__":
    main()
