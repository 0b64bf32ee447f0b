import math
import tempfile
import unittest
from pathlib import Path

import numpy as np

from config_loader import load_config
from errors import BudgetExceededError, CacheFormatError, DomainError, InsufficientDataError, InvalidGroupError
from hypgeo import HalfSpacePoint, Isometry, apply, displacement_length, distance, inverse, is_identity
from kleinian import (
    brute_force_orbit,
    cache_census,
    count_by_displacement,
    counting_table,
    cylinder_group,
    enumerate_orbit,
    group_from_config,
    load_cache,
    save_cache,
    schottky_from_circles,
    shell_counts,
    shortest_displacement,
    symmetric_schottky_group,
    trivial_group,
    validate_presentation,
)

# Two circle pairings with well separated disks.
CIRCLE_PAIRS = [((-3.0, 1.0), (3.0, 1.0)), ((-3.0j, 1.0), (3.0j, 1.0))]


def builtin_groups():
    return [cylinder_group(1.0), symmetric_schottky_group(2.5), schottky_from_circles(CIRCLE_PAIRS)]


class PresentationTests(unittest.TestCase):
    def test_cylinder_generator(self):
        group = cylinder_group(1.0)
        _, generator = group.generators[0]
        self.assertAlmostEqual(generator.trace.real, 2.0 * math.cosh(0.5), places=12)
        self.assertEqual(group.known_delta, 0.0)
        self.assertEqual(group.dimension_n, 1)

    def test_cylinder_rejects_nonpositive_length(self):
        with self.assertRaises(DomainError):
            cylinder_group(0.0)

    def test_elliptic_generator_is_invalid(self):
        theta = 0.4
        rotation = Isometry(math.cos(theta), -math.sin(theta), math.sin(theta), math.cos(theta))
        with self.assertRaises(InvalidGroupError):
            validate_presentation([rotation])

    def test_circle_pairings_give_loxodromics(self):
        group = schottky_from_circles(CIRCLE_PAIRS)
        self.assertEqual(group.rank, 2)
        for _, g in group.generators:
            self.assertGreater(displacement_length(g), 0.0)

    def test_overlapping_circles_are_invalid(self):
        with self.assertRaises(InvalidGroupError):
            schottky_from_circles([((-1.0, 1.0), (0.5, 1.0))])

    def test_symmetric_schottky_needs_disjoint_circles(self):
        with self.assertRaises(InvalidGroupError):
            symmetric_schottky_group(1.5)

    def test_symmetric_schottky_circles_nest_inside_the_annulus(self):
        length = 3.0
        rho = length / 2.0
        a = dict(symmetric_schottky_group(length).generators)["a"]
        # Isometric circle of [[a, b], [c, d]] is |c z + d| = 1.
        self.assertAlmostEqual(abs(1.0 / a.c), 1.0 / math.sinh(rho), places=12)
        self.assertAlmostEqual(abs(-a.d / a.c), 1.0 / math.tanh(rho), places=12)
        self.assertAlmostEqual(abs(a.a / a.c), 1.0 / math.tanh(rho), places=12)
        inner = 1.0 / math.tanh(rho) - 1.0 / math.sinh(rho)
        outer = 1.0 / math.tanh(rho) + 1.0 / math.sinh(rho)
        self.assertAlmostEqual(inner, math.tanh(rho / 2.0), places=12)
        self.assertGreater(inner, math.exp(-rho))
        self.assertLess(outer, math.exp(rho))
        threshold = math.log(3.0 + 2.0 * math.sqrt(2.0))
        self.assertAlmostEqual(math.tanh(threshold / 4.0), math.exp(-threshold / 2.0), places=12)

    def test_group_from_default_config_is_the_cylinder(self):
        group = group_from_config(load_config())
        self.assertEqual(group.rank, 1)
        self.assertEqual(group.params["length"], 1.0)


class EnumerationTests(unittest.TestCase):
    def test_cylinder_counts(self):
        cache = enumerate_orbit(cylinder_group(1.0), 3.5)
        self.assertEqual(len(cache), 7)
        self.assertTrue(cache.complete)
        expected = sorted(abs(k) for k in range(-3, 4))
        np.testing.assert_allclose(cache.orbit_distance, expected, atol=1e-9)

    def test_zero_radius_keeps_only_identity(self):
        cache = enumerate_orbit(symmetric_schottky_group(3.0), 0.0)
        self.assertEqual(len(cache), 1)
        self.assertEqual(cache.word(0), ())

    def test_pruned_equals_brute_force(self):
        for group in builtin_groups():
            for radius in (3.0, 6.0):
                with self.subTest(group=group.name, radius=radius):
                    pruned = enumerate_orbit(group, radius)
                    self.assertEqual(pruned.word_set(), brute_force_orbit(group, radius).word_set())

    def test_cache_is_closed_under_inverse(self):
        cache = enumerate_orbit(symmetric_schottky_group(2.5), 6.0)
        index = {cache.word(i): i for i in range(len(cache))}
        for i in range(len(cache)):
            word = cache.word(i)
            inverse_word = tuple(-k for k in reversed(word))
            self.assertIn(inverse_word, index)
            self.assertAlmostEqual(cache.orbit_distance[index[inverse_word]], cache.orbit_distance[i], places=9)

    def test_word_matrix_homomorphism(self):
        group = symmetric_schottky_group(2.5)
        cache = enumerate_orbit(group, 5.0)
        rng = np.random.default_rng(3)
        for _ in range(50):
            i, j = rng.integers(0, len(cache), size=2)
            w1, w2 = cache.word(int(i)), cache.word(int(j))
            product = group.word_matrix(w1) @ group.word_matrix(w2)
            direct = group.word_matrix(w1 + w2)
            self.assertTrue(is_identity(product @ inverse(direct), tol=1e-10))

    def test_orbit_distances_match_the_stored_matrices(self):
        group = schottky_from_circles(CIRCLE_PAIRS)
        cache = enumerate_orbit(group, 5.0)
        o = group.basepoint
        for element in list(cache)[:20]:
            self.assertAlmostEqual(distance(o, apply(element.matrix, o)), element.orbit_distance, places=9)

    def test_budget_exceeded_carries_partial_cache(self):
        with self.assertRaises(BudgetExceededError) as ctx:
            enumerate_orbit(symmetric_schottky_group(2.5), 12.0, element_cap=50)
        partial = ctx.exception.partial
        self.assertIsNotNone(partial)
        self.assertFalse(partial.complete)
        self.assertGreater(len(partial), 0)

    def test_truncation_keeps_inner_elements(self):
        cache = enumerate_orbit(cylinder_group(1.0), 10.0)
        inner = cache.truncated(4.0)
        self.assertEqual(len(inner), 9)
        with self.assertRaises(DomainError):
            inner.truncated(5.0)


class CensusTests(unittest.TestCase):
    def test_shortest_displacement_on_cylinders(self):
        for length in (1.0, 0.3):
            cache = enumerate_orbit(cylinder_group(length), 4.0)
            l0 = shortest_displacement(cache)
            self.assertAlmostEqual(l0.value, length, places=9)
            self.assertTrue(l0.certified)

    def test_shortest_displacement_needs_a_non_identity_element(self):
        with self.assertRaises(InsufficientDataError):
            shortest_displacement(enumerate_orbit(trivial_group(), 5.0))

    def test_schottky_l0_is_a_generator_length(self):
        group = symmetric_schottky_group(3.0)
        cache = enumerate_orbit(group, 8.0)
        generator_lengths = [displacement_length(g) for _, g in group.generators]
        self.assertAlmostEqual(shortest_displacement(cache).value, min(generator_lengths), places=9)

    def test_count_by_displacement(self):
        cache = enumerate_orbit(cylinder_group(1.0), 6.0)
        self.assertEqual(count_by_displacement(cache, 3.0).count, 7)
        self.assertEqual(count_by_displacement(cache, 0.0).count, 1)
        counts = [count_by_displacement(cache, r).count for r in np.linspace(0.0, 3.0, 13)]
        self.assertEqual(counts, sorted(counts))

    def test_counting_table_is_monotone(self):
        cache = enumerate_orbit(symmetric_schottky_group(2.5), 8.0)
        table = counting_table(cache, np.arange(0.0, 8.5, 0.5))
        self.assertTrue(table["orbit_count"].is_monotonic_increasing)
        self.assertTrue(table["displacement_count"].is_monotonic_increasing)
        self.assertEqual(int(table["orbit_count"].iloc[-1]), len(cache))

    def test_shell_counts_add_up(self):
        cache = enumerate_orbit(cylinder_group(1.0), 5.0)
        shells = shell_counts(cache, 1.0)
        self.assertEqual(int(shells["shell_count"].sum()), len(cache))
        self.assertEqual(int(shells["cumulative_count"].iloc[-1]), len(cache))

    def test_census_reports_l0_and_histogram(self):
        census = cache_census(enumerate_orbit(cylinder_group(1.0), 10.0))
        self.assertEqual(census["elements"], 21)
        self.assertAlmostEqual(census["l0"], 1.0, places=9)
        self.assertEqual(census["word_length_histogram"][0], 1)


class PersistenceTests(unittest.TestCase):
    def test_save_and_load_preserve_the_cache(self):
        group = schottky_from_circles(CIRCLE_PAIRS, basepoint=HalfSpacePoint(0.1j, 1.2))
        cache = enumerate_orbit(group, 5.0)
        with tempfile.TemporaryDirectory() as tmp:
            path = save_cache(cache, Path(tmp) / "cache.txt", {"meta": {"version": "test"}})
            loaded = load_cache(path)
        self.assertEqual(loaded.word_set(), cache.word_set())
        self.assertEqual(loaded.radius, cache.radius)
        self.assertEqual(loaded.group.basepoint, group.basepoint)
        np.testing.assert_allclose(loaded.orbit_distance, cache.orbit_distance, rtol=0, atol=0)
        np.testing.assert_allclose(loaded.matrices, cache.matrices, rtol=0, atol=0)

    def test_trivial_cache_round_trip(self):
        cache = enumerate_orbit(trivial_group(), 3.0)
        with tempfile.TemporaryDirectory() as tmp:
            loaded = load_cache(save_cache(cache, Path(tmp) / "trivial.txt"))
        self.assertEqual(loaded.group.rank, 0)
        self.assertEqual(len(loaded), 1)

    def test_missing_or_foreign_files_are_rejected(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(CacheFormatError):
                load_cache(Path(tmp) / "absent.txt")
            junk = Path(tmp) / "junk.txt"
            junk.write_text("# {\"format\": \"other\", \"version\": 9}\n# {}\n# {}\nword\n", encoding="utf-8")
            with self.assertRaises(CacheFormatError):
                load_cache(junk)


if __name__ == "__main__":
    unittest.main()
