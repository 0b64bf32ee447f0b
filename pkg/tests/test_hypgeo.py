import math
import unittest

import numpy as np

from errors import AmbiguousClassificationError, DomainError, PrecisionError, UnsupportedElementError
from hypgeo import (
    ELLIPTIC,
    IDENTITY,
    LOXODROMIC,
    PARABOLIC,
    BallPoint,
    HalfSpacePoint,
    Isometry,
    apply,
    ball_distance,
    ball_from_halfspace,
    classify,
    compose,
    displacement_length,
    distance,
    distance_from_origin,
    halfspace_from_ball,
    inverse,
    is_identity,
    orbit_distances,
    power,
    stack,
)

DILATION = Isometry(math.exp(0.5), 0, 0, math.exp(-0.5))


def random_point(rng: np.random.Generator) -> HalfSpacePoint:
    return HalfSpacePoint(complex(*rng.uniform(-2.0, 2.0, 2)), float(rng.uniform(0.3, 3.0)))


def near_identity_loxodromic(rng: np.random.Generator) -> Isometry:
    while True:
        g = Isometry(*(np.eye(2).ravel() + 0.3 * (rng.normal(size=4) + 1j * rng.normal(size=4))))
        if classify(g) == LOXODROMIC:
            return g


def random_loxodromic(rng: np.random.Generator) -> Isometry:
    while True:
        entries = rng.normal(size=4) + 1j * rng.normal(size=4)
        g = Isometry(*entries)
        if abs(g.trace.imag) > 0.1 or abs(g.trace.real) > 2.5:
            return g


class DistanceTests(unittest.TestCase):
    def test_vertical_geodesic(self):
        self.assertAlmostEqual(distance(HalfSpacePoint(0j, 1.0), HalfSpacePoint(0j, math.e)), 1.0, places=14)

    def test_horizontal_offset(self):
        self.assertAlmostEqual(distance(HalfSpacePoint(0j, 1.0), HalfSpacePoint(3 + 0j, 1.0)), math.acosh(5.5), places=12)
        self.assertAlmostEqual(math.acosh(5.5), 2.39053, places=5)

    def test_zero_on_equal_points(self):
        p = HalfSpacePoint(0.3 - 0.2j, 0.7)
        self.assertEqual(distance(p, p), 0.0)

    def test_rejects_non_finite_and_nonpositive_heights(self):
        with self.assertRaises(DomainError):
            HalfSpacePoint(complex(math.nan, 0.0), 1.0)
        with self.assertRaises(DomainError):
            HalfSpacePoint(0j, 0.0)

    def test_symmetry_and_triangle_inequality(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            p, q, r = (random_point(rng) for _ in range(3))
            self.assertAlmostEqual(distance(p, q), distance(q, p), places=12)
            self.assertLessEqual(distance(p, r), distance(p, q) + distance(q, r) + 1e-12)


class IsometryTests(unittest.TestCase):
    def test_determinant_is_normalized(self):
        g = Isometry(3.0, 1.0j, 2.0, 5.0)
        self.assertLessEqual(abs(g.determinant - 1.0), 1e-12)

    def test_singular_matrix_is_rejected(self):
        with self.assertRaises(PrecisionError):
            Isometry(1.0, 2.0, 2.0, 4.0)

    def test_dilation_moves_origin_up_the_axis(self):
        image = apply(DILATION, HalfSpacePoint.origin())
        self.assertAlmostEqual(abs(image.horizontal), 0.0, places=14)
        self.assertAlmostEqual(image.height, math.e, places=12)
        self.assertAlmostEqual(distance(HalfSpacePoint.origin(), image), 1.0, places=12)

    def test_identity_action(self):
        p = HalfSpacePoint(0.4 + 1.1j, 2.2)
        self.assertEqual(apply(Isometry.identity(), p), p)

    def test_inverse_law(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            g, p = random_loxodromic(rng), random_point(rng)
            back = apply(g, apply(inverse(g), p))
            self.assertLessEqual(abs(back.horizontal - p.horizontal), 1e-10)
            self.assertLessEqual(abs(back.height - p.height), 1e-10)
            self.assertTrue(is_identity(compose(g, inverse(g)), tol=1e-12))

    def test_composition_is_associative(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            f, g, h = (random_loxodromic(rng) for _ in range(3))
            left = compose(compose(f, g), h).as_array()
            right = compose(f, compose(g, h)).as_array()
            scale = max(1.0, float(np.abs(left).max()))
            self.assertLessEqual(float(np.abs(left - right).max()) / scale, 1e-12)

    def test_isometry_invariance_on_random_words(self):
        rng = np.random.default_rng(17)
        letters = [near_identity_loxodromic(rng) for _ in range(3)]
        letters += [inverse(g) for g in letters]
        for _ in range(1000):
            g = Isometry.identity()
            for index in rng.integers(0, len(letters), size=int(rng.integers(1, 11))):
                g = g @ letters[index]
            p, q = random_point(rng), random_point(rng)
            try:
                gp, gq = apply(g, p), apply(g, q)
            except PrecisionError:
                continue
            self.assertLessEqual(abs(distance(gp, gq) - distance(p, q)), 1e-10 * max(1.0, distance(p, q)))


class ClassificationTests(unittest.TestCase):
    def test_identity_and_dilation(self):
        self.assertEqual(classify(Isometry.identity()), IDENTITY)
        self.assertEqual(classify(Isometry(-1, 0, 0, -1)), IDENTITY)
        self.assertEqual(classify(DILATION), LOXODROMIC)

    def test_rotation_is_elliptic(self):
        theta = 0.7
        rotation = Isometry(math.cos(theta), -math.sin(theta), math.sin(theta), math.cos(theta))
        self.assertEqual(classify(rotation), ELLIPTIC)

    def test_translation_is_parabolic(self):
        self.assertEqual(classify(Isometry(1, 1, 0, 1)), PARABOLIC)

    def test_complex_trace_is_loxodromic(self):
        self.assertEqual(classify(Isometry(1j * math.exp(0.3), 0, 0, -1j * math.exp(-0.3))), LOXODROMIC)

    def test_borderline_trace_is_refused(self):
        # trace 2 + 1e-10: inside the band, off the exact segment
        t = 1.0 + 1e-5
        near_parabolic = Isometry(t, 1.0, 0.0, 1.0 / t)
        with self.assertRaises(AmbiguousClassificationError):
            classify(near_parabolic)


class DisplacementTests(unittest.TestCase):
    def test_known_values(self):
        self.assertEqual(displacement_length(Isometry.identity()), 0.0)
        self.assertAlmostEqual(displacement_length(DILATION), 1.0, places=12)

    def test_non_loxodromic_is_unsupported(self):
        with self.assertRaises(UnsupportedElementError):
            displacement_length(Isometry(1, 1, 0, 1))

    def test_powers_scale_the_length(self):
        rng = np.random.default_rng(19)
        for _ in range(20):
            g = random_loxodromic(rng)
            base = displacement_length(g)
            for n in range(1, 11):
                gn = power(g, n)
                if not np.all(np.isfinite(gn.as_array())):
                    continue
                self.assertLessEqual(abs(displacement_length(gn) - n * base), 1e-8 * max(1.0, n * base))

    def test_length_is_a_minimum_of_displacements(self):
        rng = np.random.default_rng(23)
        g = random_loxodromic(rng)
        length = displacement_length(g)
        for _ in range(100):
            p = random_point(rng)
            self.assertLessEqual(length, distance(p, apply(g, p)) + 1e-10)

    def test_vectorized_distances_match_scalar(self):
        rng = np.random.default_rng(29)
        gs = [random_loxodromic(rng) for _ in range(10)]
        x, y = random_point(rng), random_point(rng)
        expected = [distance(x, apply(g, y)) for g in gs]
        np.testing.assert_allclose(orbit_distances(stack(gs), x, y), expected, rtol=1e-10, atol=1e-12)


class BallModelTests(unittest.TestCase):
    def test_origin_maps_to_center(self):
        center = ball_from_halfspace(HalfSpacePoint.origin())
        self.assertAlmostEqual(center.norm, 0.0, places=15)

    def test_round_trip(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            p = random_point(rng)
            back = halfspace_from_ball(ball_from_halfspace(p))
            self.assertLessEqual(abs(back.horizontal - p.horizontal), 1e-12 * max(1.0, abs(p.horizontal)))
            self.assertLessEqual(abs(back.height - p.height), 1e-12 * max(1.0, p.height))

    def test_cross_model_distances_agree(self):
        rng = np.random.default_rng(37)
        for _ in range(100):
            p, q = random_point(rng), random_point(rng)
            self.assertAlmostEqual(ball_distance(ball_from_halfspace(p), ball_from_halfspace(q)), distance(p, q), delta=1e-10)

    def test_distance_from_center(self):
        rng = np.random.default_rng(41)
        o = HalfSpacePoint.origin()
        for _ in range(50):
            p = random_point(rng)
            self.assertAlmostEqual(distance_from_origin(ball_from_halfspace(p)), distance(o, p), delta=1e-10)

    def test_ball_point_must_be_inside(self):
        with self.assertRaises(DomainError):
            BallPoint((0.6, 0.6, 0.6))


if __name__ == "__main__":
    unittest.main()
