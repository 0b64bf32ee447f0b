import json
import math
import tempfile
import unittest
from pathlib import Path

import numpy as np

from errors import DomainError, FitError, HypothesisViolationError, InsufficientDataError
from exponent import SLOPE, ExponentEstimate
from kleinian import cylinder_group, enumerate_orbit, shortest_displacement, symmetric_schottky_group, trivial_group
from specmeas import KernelQuery, kernel_h3
from verify import (
    check_abstract_hypothesis,
    check_derivatives,
    check_lemma_distance,
    check_model_bounds,
    check_truncation,
    divergence_test,
    fit_growth_exponent,
    lemma_stability,
    log_lambda_grid,
    report_to_csv,
    report_to_json,
    sample_pairs,
    summarize_reports,
)

MODEL_LAMBDAS = log_lambda_grid(1.0, 100.0, 40)
MODEL_RADII = np.linspace(0.25, 20.0, 80)
HYPOTHESIS_LAMBDAS = log_lambda_grid(1.0, 50.0, 12)


class GrowthFitTests(unittest.TestCase):
    def test_pure_powers(self):
        t = np.geomspace(1.0, 1e4, 9)
        self.assertAlmostEqual(fit_growth_exponent(t, t ** 2).slope, 2.0, places=12)
        self.assertAlmostEqual(fit_growth_exponent(t, np.full_like(t, 3.7)).slope, 0.0, places=12)

    def test_perturbed_power(self):
        t = np.geomspace(10.0, 1e5, 25)
        fit = fit_growth_exponent(t, t ** 1.5 * (1.0 + 0.01 * np.sin(t)))
        self.assertAlmostEqual(fit.slope, 1.5, delta=0.02)
        self.assertGreater(fit.residual_rms, 0.0)

    def test_rejects_bad_input(self):
        with self.assertRaises(DomainError):
            fit_growth_exponent([1.0, 2.0, 3.0], [1.0, 0.0, 2.0])
        with self.assertRaises(InsufficientDataError):
            fit_growth_exponent([1.0, 2.0], [1.0, 2.0])
        with self.assertRaises(FitError):
            fit_growth_exponent([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])


class ModelBoundTests(unittest.TestCase):
    def test_default_grid_passes_for_each_l0(self):
        for l0 in (0.5, 1.0, 2.0):
            with self.subTest(l0=l0):
                report = check_model_bounds(l0, MODEL_LAMBDAS, MODEL_RADII)
                self.assertTrue(report.all_finite)
                self.assertTrue(report.passed, msg=str(report.slopes))
                self.assertEqual(set(report.constants), {"j0", "j1", "j2"})
                self.assertEqual(len(report.cells), 3 * 40 * 80)

    def test_small_distance_limit(self):
        report = check_model_bounds(1.0, [1.0, 10.0, 100.0], [1e-9], j_set=(0,))
        np.testing.assert_allclose(report.cells["ratio"], 1.0 / (2.0 * math.pi ** 2), rtol=1e-6)

    def test_single_cell_grid(self):
        report = check_model_bounds(1.0, [3.0], [2.0], j_set=(0,))
        self.assertEqual(len(report.cells), 1)
        self.assertEqual(report.slopes["j0"], 0.0)
        self.assertTrue(report.passed)

    def test_empty_grid_is_rejected(self):
        with self.assertRaises(DomainError):
            check_model_bounds(1.0, [], [1.0])


class DerivativeTests(unittest.TestCase):
    def test_closed_form_derivatives_match_differences(self):
        report = check_derivatives(log_lambda_grid(1.0, 50.0, 8), np.linspace(0.01, 10.0, 20))
        self.assertTrue(report.passed, msg=str(report.metrics))
        self.assertEqual(set(report.metrics["max_rel_error"]), {"j1", "j2"})

    def test_order_zero_is_rejected(self):
        with self.assertRaises(DomainError):
            check_derivatives([1.0], [1.0], j_set=(0,))


class PairTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.group = cylinder_group(1.0)
        cls.cache = enumerate_orbit(cls.group, 14.0)

    def test_pairs_are_deterministic_and_inside_the_window(self):
        first = sample_pairs(self.group, self.cache, 12, 0.05, 6.0, seed=7)
        again = sample_pairs(self.group, self.cache, 12, 0.05, 6.0, seed=7)
        self.assertEqual([p.distance for p in first], [p.distance for p in again])
        for pair in first:
            self.assertGreaterEqual(pair.distance, 0.05)
            self.assertLessEqual(pair.distance, 6.0 + 1e-9)

    def test_bad_windows(self):
        with self.assertRaises(DomainError):
            sample_pairs(self.group, self.cache, 0, 0.05, 6.0, seed=1)
        with self.assertRaises(DomainError):
            sample_pairs(self.group, self.cache, 3, 2.0, 1.0, seed=1)


class AbstractHypothesisTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.group = cylinder_group(1.0)
        cls.cache = enumerate_orbit(cls.group, 14.0)
        cls.pairs = sample_pairs(cls.group, cls.cache, 12, 0.05, 6.0, seed=20240917)

    def test_cylinder_ratios_are_bounded(self):
        report = check_abstract_hypothesis(self.group, self.cache, HYPOTHESIS_LAMBDAS, self.pairs, seed=20240917)
        self.assertTrue(report.all_finite)
        self.assertEqual(report.j_set, (0, 2))
        self.assertIn("ext_j3", report.constants)
        self.assertLessEqual(report.slopes["j0"], 0.1)
        self.assertEqual(report.details["s_used"], 0.5)
        self.assertEqual(len(report.pairs), 12)
        self.assertTrue(report.passed, msg=str(report.slopes))

    def test_schottky_bounds_hold_away_from_case_one_j2(self):
        group = symmetric_schottky_group(3.0)
        cache = enumerate_orbit(group, 14.0)
        pairs = sample_pairs(group, cache, 12, 0.05, 6.0, seed=20240917)
        estimate = ExponentEstimate(0.44, SLOPE, 0.03, 18.0, 2, 10, 0.0)
        report = check_abstract_hypothesis(group, cache, HYPOTHESIS_LAMBDAS, pairs, estimate=estimate, seed=20240917)
        self.assertTrue(report.all_finite)
        for series in ("j0", "ext_j1", "ext_j2", "ext_j3"):
            with self.subTest(series=series):
                self.assertLessEqual(report.slopes[series], 0.1)
        self.assertLessEqual(report.details["case_slopes"]["j2_caseII"], 0.1)
        flagged = report.details["case_I_small_distance"]
        self.assertIn("j2", flagged)
        self.assertGreater(flagged["j2"]["slope"], 0.1)
        self.assertLess(flagged["j2"]["min_d"], 0.5 * shortest_displacement(cache).value)

    def test_trivial_group_reduces_to_the_model_kernel(self):
        group = trivial_group()
        cache = enumerate_orbit(group, 5.0)
        pairs = sample_pairs(group, cache, 3, 0.5, 3.0, seed=1)
        report = check_abstract_hypothesis(group, cache, [2.0, 8.0], pairs, j_set=(0,), extended_j_set=())
        for _, row in report.cells.iterrows():
            self.assertAlmostEqual(row["value"], kernel_h3(KernelQuery(row["lambda"], row["d"], 0)), places=12)
            self.assertEqual(row["tail_bound"], 0.0)

    def test_gate_refuses_large_exponents(self):
        group = symmetric_schottky_group(3.0)
        cache = enumerate_orbit(group, 6.0)
        pairs = sample_pairs(group, cache, 2, 0.1, 1.0, seed=3)
        estimate = ExponentEstimate(0.9, SLOPE, 0.15, 6.0, 2, 10, 0.0)
        with self.assertRaises(HypothesisViolationError):
            check_abstract_hypothesis(group, cache, [1.0, 2.0, 4.0], pairs, estimate=estimate)

    def test_truncation_stays_inside_the_tail_bound(self):
        report = check_truncation(self.group, self.cache, HYPOTHESIS_LAMBDAS[::3], self.pairs[:6])
        self.assertTrue(report.passed, msg=str(report.metrics))
        self.assertEqual(report.metrics["radius_T"], 7.0)
        self.assertEqual(report.metrics["violations"], 0)


class LemmaDistanceTests(unittest.TestCase):
    def test_cylinder_axis_gives_ratio_one(self):
        group = cylinder_group(1.0)
        report = check_lemma_distance(group, enumerate_orbit(group, 14.0))
        self.assertTrue(report.passed)
        self.assertAlmostEqual(report.metrics["sup_ratio"], 1.0, places=8)
        self.assertIn(report.metrics["elements"], (24, 26))

    def test_trivial_group_is_vacuous(self):
        group = trivial_group()
        report = check_lemma_distance(group, enumerate_orbit(group, 4.0))
        self.assertTrue(report.passed)
        self.assertEqual(report.as_dict()["status"], "PASS (vacuous)")

    def test_schottky_sup_is_finite(self):
        group = symmetric_schottky_group(3.0)
        report = check_lemma_distance(group, enumerate_orbit(group, 9.0))
        self.assertTrue(math.isfinite(report.metrics["sup_ratio"]))
        self.assertGreater(report.metrics["elements"], 0)

    def test_sup_is_stable_from_radius_twelve_to_fourteen(self):
        for group in (cylinder_group(1.0), symmetric_schottky_group(3.0)):
            with self.subTest(group=group.name):
                cache = enumerate_orbit(group, 14.0)
                earlier = check_lemma_distance(group, cache.truncated(12.0)).metrics["sup_ratio"]
                later = check_lemma_distance(group, cache).metrics["sup_ratio"]
                self.assertTrue(math.isfinite(later))
                self.assertLess(abs(later - earlier) / later, 0.05)
                stability = lemma_stability(group, cache)
                self.assertEqual(stability["earlier_radius"], 12.0)
                self.assertAlmostEqual(stability["relative_change"], abs(later - earlier) / later, places=12)
                self.assertTrue(stability["stable"])


class DivergenceTests(unittest.TestCase):
    K_GRID = [1_000, 10_000, 100_000, 1_000_000]

    def test_flat_cylinder_fails_the_envelope(self):
        report = divergence_test(1.0, 1.0, self.K_GRID, j=1)
        self.assertGreaterEqual(report.metrics["slope"], 1.45)
        self.assertLessEqual(report.metrics["slope"], 1.55)
        self.assertFalse(report.metrics["envelope_holds"])
        self.assertEqual(report.as_dict()["status"], "FAIL-as-expected")

    def test_order_zero_grows_like_a_square_root(self):
        report = divergence_test(1.0, 1.0, self.K_GRID, j=0, expected=(0.45, 0.55))
        self.assertAlmostEqual(report.metrics["slope"], 0.5, delta=0.05)
        self.assertTrue(report.passed)

    def test_degenerate_grids(self):
        with self.assertRaises(InsufficientDataError):
            divergence_test(1.0, 1.0, [10, 100, 1000])
        with self.assertRaises(FitError):
            divergence_test(1.0, 1.0, [50, 50, 50, 50])
        with self.assertRaises(DomainError):
            divergence_test(1.0, 1.0, [100, 10, 1000, 10000])


class ArtifactTests(unittest.TestCase):
    def test_json_embeds_config_and_version(self):
        report = divergence_test(1.0, 1.0, [100, 1_000, 10_000, 100_000], j=1)
        config = {"runtime": {"seed": 5}}
        with tempfile.TemporaryDirectory() as tmp:
            path = report_to_json(report, Path(tmp) / "reports" / "counterexample.json", config)
            payload = json.loads(path.read_text(encoding="utf-8"))
            csv_path = report_to_csv(report, Path(tmp) / "tables" / "sums.csv")
            self.assertTrue(csv_path.exists())
        self.assertEqual(payload["config"], config)
        self.assertIn("artifact_version", payload)
        self.assertEqual(payload["report"]["status"], "FAIL-as-expected")

    def test_plain_dicts_and_infinities_serialize(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = report_to_json({"check": "x", "bound": math.inf}, Path(tmp) / "x.json")
            payload = json.loads(path.read_text(encoding="utf-8"))
        self.assertEqual(payload["report"]["bound"], "inf")

    def test_summary_counts_passes(self):
        reports = [
            check_model_bounds(1.0, [3.0], [2.0], j_set=(0,)),
            divergence_test(1.0, 1.0, [100, 1_000, 10_000, 100_000], j=1),
        ]
        summary = summarize_reports(reports)
        self.assertEqual(list(summary["check"]), ["model_bounds", "counterexample"])
        self.assertTrue(summary["passed"].all())


if __name__ == "__main__":
    unittest.main()
