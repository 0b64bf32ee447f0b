import json
import tempfile
import unittest
from pathlib import Path

from cli import EXIT_BUDGET, EXIT_GATE, EXIT_INPUT, EXIT_PASS, build_parser, main, run_command, _flag_overrides
from config_loader import load_config
from exponent import SLOPE


def config_for(tmp: str, **sections):
    overrides = {"outputs": {"dir": tmp, "cache": str(Path(tmp) / "orbit_cache.txt")}}
    overrides.update(sections)
    return load_config(overrides=overrides)


class EnumerateCommandTests(unittest.TestCase):
    def test_cylinder_census(self):
        with tempfile.TemporaryDirectory() as tmp:
            code, payload = run_command("enumerate", config_for(tmp, enumeration={"radius": 10.0}))
            self.assertEqual(code, EXIT_PASS)
            self.assertEqual(payload["census"]["elements"], 21)
            self.assertTrue((Path(tmp) / "orbit_cache.txt").exists())
            self.assertTrue((Path(tmp) / "tables" / "shell_counts.csv").exists())
            report = json.loads((Path(tmp) / "reports" / "enumerate.json").read_text(encoding="utf-8"))
            self.assertEqual(report["config"]["enumeration"]["radius"], 10.0)

    def test_zero_radius(self):
        with tempfile.TemporaryDirectory() as tmp:
            code, payload = run_command("enumerate", config_for(tmp, enumeration={"radius": 0.0}))
        self.assertEqual(code, EXIT_PASS)
        self.assertEqual(payload["census"]["elements"], 1)

    def test_budget_overrun_keeps_the_partial_cache(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = config_for(
                tmp,
                group={"builtin": "schottky", "length": 2.5},
                enumeration={"radius": 12.0, "element_cap": 50},
            )
            code, _ = run_command("enumerate", config)
            self.assertEqual(code, EXIT_BUDGET)
            self.assertTrue((Path(tmp) / "orbit_cache.txt").exists())


class DeltaCommandTests(unittest.TestCase):
    def test_cylinder_delta_is_near_zero(self):
        with tempfile.TemporaryDirectory() as tmp:
            run_command("enumerate", config_for(tmp))
            code, payload = run_command("delta", config_for(tmp))
            self.assertTrue((Path(tmp) / "tables" / "counting.csv").exists())
        self.assertEqual(code, EXIT_PASS)
        self.assertLessEqual(payload["estimates"][SLOPE]["delta_hat"], 0.05)
        self.assertEqual(payload["status"], "PASS")

    def test_schottky_estimates_use_the_longer_radius(self):
        with tempfile.TemporaryDirectory() as tmp:
            sections = {"group": {"builtin": "schottky", "length": 3.0}, "enumeration": {"radius": 12.0}}
            run_command("enumerate", config_for(tmp, **sections))
            code, payload = run_command("delta", config_for(tmp, **sections))
        self.assertEqual(code, EXIT_PASS)
        for estimate in payload["estimates"].values():
            self.assertGreaterEqual(estimate["radius"], 18.0)
        self.assertLessEqual(payload["agreement"]["difference"], 0.02)

    def test_missing_cache_is_an_input_error(self):
        with tempfile.TemporaryDirectory() as tmp:
            code, _ = run_command("delta", config_for(tmp))
        self.assertEqual(code, EXIT_INPUT)

    def test_cache_of_another_group_is_rejected(self):
        with tempfile.TemporaryDirectory() as tmp:
            run_command("enumerate", config_for(tmp, enumeration={"radius": 10.0}))
            code, _ = run_command("delta", config_for(tmp, group={"length": 2.0}))
        self.assertEqual(code, EXIT_INPUT)


class GateTests(unittest.TestCase):
    def test_s_below_the_exponent_is_refused(self):
        with tempfile.TemporaryDirectory() as tmp:
            sections = {
                "group": {"builtin": "schottky", "length": 3.0},
                "enumeration": {"radius": 12.0},
                "spectral": {"s_override": 0.1},
            }
            self.assertEqual(run_command("enumerate", config_for(tmp, **sections))[0], EXIT_PASS)
            code, payload = run_command("kernel", config_for(tmp, **sections))
        self.assertEqual(code, EXIT_GATE)
        self.assertEqual(payload["status"], "REFUSED")


class CounterexampleCommandTests(unittest.TestCase):
    def test_negative_control_is_reported(self):
        with tempfile.TemporaryDirectory() as tmp:
            code, payload = run_command("counterexample", config_for(tmp))
            self.assertTrue((Path(tmp) / "tables" / "counterexample_partial_sums.csv").exists())
        self.assertEqual(code, EXIT_PASS)
        self.assertEqual(payload["status"], "FAIL-as-expected")
        self.assertAlmostEqual(payload["slope_j1"], 1.5, delta=0.05)
        self.assertAlmostEqual(payload["slope_j0"], 0.5, delta=0.05)


class ArgumentTests(unittest.TestCase):
    def test_invalid_config_exits_with_input_error(self):
        with tempfile.TemporaryDirectory() as tmp:
            code, payload = run_command("enumerate", config_for(tmp, group={"builtin": "hexagon"}))
        self.assertEqual(code, EXIT_INPUT)
        self.assertEqual(payload["status"], "INVALID")

    def test_unreadable_config_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            self.assertEqual(main(["enumerate", "--config", str(Path(tmp) / "absent.json")]), EXIT_INPUT)

    def test_flags_become_overrides(self):
        args = build_parser().parse_args(["verify", "--out", "runs/a", "--threads", "3", "--seed", "9", "--budget", "100"])
        overrides = _flag_overrides(args)
        self.assertEqual(overrides["outputs"], {"dir": "runs/a", "cache": str(Path("runs/a") / "orbit_cache.txt")})
        self.assertEqual(overrides["runtime"], {"threads": 3, "seed": 9})
        self.assertEqual(overrides["enumeration"], {"element_cap": 100})

    def test_explicit_cache_wins(self):
        args = build_parser().parse_args(["delta", "--out", "runs/a", "--cache", "caches/c.txt"])
        self.assertEqual(_flag_overrides(args)["outputs"]["cache"], "caches/c.txt")

    def test_main_runs_a_command(self):
        with tempfile.TemporaryDirectory() as tmp:
            self.assertEqual(main(["counterexample", "--out", tmp]), EXIT_PASS)
            self.assertTrue((Path(tmp) / "reports" / "counterexample_summary.json").exists())


if __name__ == "__main__":
    unittest.main()
