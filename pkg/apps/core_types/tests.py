import math

import numpy as np

from django.test import SimpleTestCase

from apps.base.exceptions import (
    BadDimension,
    ExponentOrdering,
    NonPositiveCoefficient,
)
from apps.core_types.parameters import Parameters, validate
from apps.core_types.representations import (
    GridFunction,
    RadialProfile,
    quadrature,
)

CANONICAL = Parameters(N=1, a=1.0, b=1.0, p=3.0, q=7.0, omega=1.0)


def profile(N, func, rmax=40.0, h=0.005):
    r = np.arange(0, rmax + h / 2, h)
    return RadialProfile.build(r, func(r), N)


class ValidateTest(SimpleTestCase):
    def test_canonical_instance(self):
        self.assertIs(validate(CANONICAL), CANONICAL)
        self.assertEqual(CANONICAL.alpha, 1.0)
        self.assertEqual(CANONICAL.beta, 3.0)

    def test_idempotent(self):
        self.assertEqual(validate(validate(CANONICAL)), CANONICAL)

    def test_three_dimensional_window(self):
        params = Parameters(N=3, a=1.0, b=1.0, p=2.0, q=4.0, omega=1.0)
        validate(params)
        self.assertEqual(params.alpha, 1.5)
        self.assertEqual(params.beta, 4.5)
        with self.assertRaises(ExponentOrdering):
            validate(params._replace(q=5.0))

    def test_critical_exponent_excluded(self):
        with self.assertRaises(ExponentOrdering):
            validate(CANONICAL._replace(p=5.0))
        with self.assertRaises(ExponentOrdering):
            validate(CANONICAL._replace(q=5.0))
        with self.assertRaises(ExponentOrdering):
            validate(CANONICAL._replace(p=1.0))

    def test_coefficients(self):
        for field in ("a", "b", "omega"):
            with self.subTest(field=field):
                with self.assertRaises(NonPositiveCoefficient):
                    validate(CANONICAL._replace(**{field: 0.0}))

    def test_non_finite_values(self):
        for field in ("a", "b", "omega"):
            for value in (math.nan, math.inf):
                with self.subTest(field=field, value=value):
                    with self.assertRaises(NonPositiveCoefficient):
                        validate(CANONICAL._replace(**{field: value}))
        with self.assertRaises(ExponentOrdering):
            validate(CANONICAL._replace(q=math.nan))

    def test_single_power_mode(self):
        validate(CANONICAL._replace(a=0.0), single_power=True)
        validate(CANONICAL._replace(b=0.0), single_power=True)
        with self.assertRaises(NonPositiveCoefficient):
            validate(CANONICAL._replace(a=0.0, b=0.0), single_power=True)
        with self.assertRaises(NonPositiveCoefficient):
            validate(CANONICAL, single_power=True)

    def test_dimension(self):
        for N in (0, 4, 1.5):
            with self.subTest(N=N):
                with self.assertRaises(BadDimension):
                    validate(CANONICAL._replace(N=N))

    def test_errors_carry_codes(self):
        try:
            validate(CANONICAL._replace(N=4))
        except BadDimension as e:
            self.assertEqual(e.code, "bad_dimension")
            self.assertEqual(e.parameters.N, 4)


class QuadratureTest(SimpleTestCase):
    def test_line_gaussian(self):
        v = profile(1, lambda r: np.exp(-(r ** 2)))
        total = float(np.dot(quadrature(v), v.values))
        self.assertAlmostEqual(total, math.sqrt(math.pi), delta=1e-8)

    def test_space_exponential(self):
        v = profile(3, lambda r: np.exp(-r))
        total = float(np.dot(quadrature(v), v.values))
        self.assertAlmostEqual(total, 8 * math.pi, delta=1e-6)

    def test_plane_gaussian(self):
        v = profile(2, lambda r: np.exp(-(r ** 2)))
        total = float(np.dot(quadrature(v), v.values))
        self.assertAlmostEqual(total, math.pi, delta=1e-8)

    def test_zero_function(self):
        v = profile(3, np.zeros_like)
        self.assertEqual(float(np.dot(quadrature(v), v.values)), 0.0)

    def test_weights_nonnegative(self):
        for N in (1, 2, 3):
            v = profile(N, lambda r: np.exp(-r))
            self.assertTrue(np.all(quadrature(v) >= 0))

    def test_low_order_polynomials(self):
        # ∫_{-2}^{2} 1 dx is exact, the ball volume up to O(h²)
        line = profile(1, np.ones_like, rmax=2.0)
        self.assertAlmostEqual(float(np.sum(quadrature(line))), 4.0, places=12)
        ball = profile(3, np.ones_like, rmax=2.0)
        volume = float(np.sum(quadrature(ball)))
        self.assertAlmostEqual(volume / (4 / 3 * math.pi * 8), 1.0, delta=1e-4)


class RadialProfileTest(SimpleTestCase):
    def test_rejects_bad_abscissae(self):
        with self.assertRaises(ValueError):
            RadialProfile.build(np.arange(1, 10.0), np.ones(9), 1)
        with self.assertRaises(ValueError):
            RadialProfile.build(np.array([0, 1, 3, 4, 5.0]), np.ones(5), 1)

    def test_frozen(self):
        v = profile(1, lambda r: np.exp(-r))
        with self.assertRaises(ValueError):
            v.values[0] = 2.0

    def test_tail_rate(self):
        v = profile(1, lambda r: np.exp(-2.5 * r), rmax=10.0)
        self.assertAlmostEqual(v.tail_rate, 2.5, places=8)
        self.assertTrue(v.is_positive_decreasing())
        self.assertTrue(v.tail_captured())

    def test_truncated_tail(self):
        v = profile(1, lambda r: np.exp(-r), rmax=5.0)
        self.assertFalse(v.tail_captured())


class GridFunctionTest(SimpleTestCase):
    def test_power_of_two(self):
        with self.assertRaises(ValueError):
            GridFunction.from_values(8.0, np.ones(100))

    def test_mass_metadata(self):
        u = GridFunction.from_function(16.0, 512, lambda x: np.exp(-(x ** 2)))
        self.assertAlmostEqual(u.mass, math.sqrt(math.pi / 2), places=12)
        shifted = u.with_values(u.values * np.exp(1j * u.x))
        self.assertAlmostEqual(shifted.mass / u.mass, 1.0, delta=1e-12)

    def test_spectral_round_trip(self):
        rng = np.random.default_rng(7)
        values = rng.standard_normal(256) + 1j * rng.standard_normal(256)
        u = GridFunction.from_values(4.0, values)
        back = np.fft.ifft(np.fft.fft(u.values))
        np.testing.assert_allclose(back, u.values, rtol=1e-12, atol=1e-12)

    def test_grid_layout(self):
        u = GridFunction.from_values(4.0, np.zeros(8))
        self.assertEqual(u.x[0], -4.0)
        self.assertEqual(u.dx, 1.0)
        self.assertEqual(u.k[1], 2 * math.pi / 8)
