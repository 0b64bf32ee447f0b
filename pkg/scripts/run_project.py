#!/usr/bin/env python3
"""Orchestrate the full verifier pipeline: enumeration, exponent, series, kernels, checks and quality gate."""

from __future__ import annotations

import argparse
import subprocess
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]

STAGES = ["enumerate", "delta", "poincare", "kernel", "verify", "counterexample"]
# verify may legitimately end in 1 (a bound failed) and still leave every artifact behind.
TOLERATED_EXIT = {"verify": {0, 1}, "counterexample": {0, 1}}


def run(cmd: list[str], allowed: set[int] | None = None) -> int:
    print("$", " ".join(cmd))
    result = subprocess.run(cmd, cwd=ROOT)
    if result.returncode not in (allowed or {0}):
        raise SystemExit(result.returncode)
    return result.returncode


def main() -> None:
    parser = argparse.ArgumentParser(description="Run the spectral-measure verifier pipeline.")
    parser.add_argument("--config", help="JSON run configuration passed to every stage")
    parser.add_argument("--out", default="outputs", help="Output directory")
    parser.add_argument("--threads", type=int, default=1, help="Worker processes for lambda sweeps")
    parser.add_argument("--skip-enumeration", action="store_true", help="Reuse the existing orbit cache")
    parser.add_argument("--strict", action="store_true", help="Fail on quality-gate violations")
    args = parser.parse_args()

    common = ["--out", args.out, "--threads", str(args.threads)]
    if args.config:
        common += ["--config", args.config]
    for stage in STAGES:
        if stage == "enumerate" and args.skip_enumeration:
            continue
        run(["python3", "cli.py", stage, *common], TOLERATED_EXIT.get(stage))
    quality_cmd = ["python3", "scripts/quality_gate.py", "--out", args.out]
    if args.strict:
        quality_cmd.append("--strict")
    run(quality_cmd)


if __name__ == "__main__":
    main()
