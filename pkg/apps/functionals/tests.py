import math

import numpy as np

from django.test import SimpleTestCase

from apps.base.exceptions import ResolutionTooCoarse, ScalingOutOfBox
from apps.core_types.parameters import Parameters
from apps.core_types.representations import GridFunction, RadialProfile
from apps.functionals.functionals import (
    h1_distance,
    norms,
    radial_derivative,
    rescale,
    scaling_curve,
    spectral_tail_fraction,
)

PARAMS = Parameters(N=1, a=1.0, b=1.0, p=3.0, q=7.0, omega=1.0)
SQRT_PI = math.sqrt(math.pi)


def gaussian_grid(L=16.0, n=1024, width=1.0):
    return GridFunction.from_function(
        L, n, lambda x: np.exp(-(x ** 2) / (2 * width ** 2))
    )


def gaussian_profile(N, rmax=12.0, h=0.005):
    r = np.arange(0, rmax + h / 2, h)
    return RadialProfile.build(r, np.exp(-(r ** 2) / 2), N)


class GaussianNormsTest(SimpleTestCase):
    """v(x) = exp(-x²/2) with a = b = 1, p = 3, q = 7, ω = 1"""

    expected = {
        "mass": SQRT_PI,
        "grad2": SQRT_PI / 2,
        "lp": math.sqrt(math.pi / 2),
        "lq": SQRT_PI / 2,
        "E": 0.0190065,
        "K_omega": 0.5191398,
        "P": 0.2405633,
    }

    def assertReport(self, report, rel):
        for name in ("mass", "grad2", "lp", "lq"):
            value = getattr(report, name)
            self.assertAlmostEqual(
                value / self.expected[name], 1.0, delta=rel, msg=name
            )
        for name in ("E", "K_omega", "P"):
            self.assertAlmostEqual(
                getattr(report, name), self.expected[name], delta=1e-6
            )

    def test_periodic_grid(self):
        self.assertReport(norms(gaussian_grid(), PARAMS), rel=1e-10)

    def test_radial_line(self):
        self.assertReport(norms(gaussian_profile(1), PARAMS), rel=1e-7)

    def test_action_adds_half_mass(self):
        report = norms(gaussian_grid(), PARAMS)
        self.assertAlmostEqual(
            report.S_omega, report.E + 0.5 * report.mass, places=12
        )

    def test_radial_plane_and_space(self):
        plane = Parameters(N=2, a=1.0, b=1.0, p=2.0, q=4.0, omega=1.0)
        report = norms(gaussian_profile(2), plane)
        self.assertAlmostEqual(report.mass / math.pi, 1.0, delta=1e-7)
        self.assertAlmostEqual(report.grad2 / math.pi, 1.0, delta=1e-6)

        space = Parameters(N=3, a=1.0, b=1.0, p=1.5, q=3.0, omega=1.0)
        report = norms(gaussian_profile(3), space)
        self.assertAlmostEqual(
            report.mass / math.pi ** 1.5, 1.0, delta=1e-7
        )
        self.assertAlmostEqual(
            report.grad2 / (1.5 * math.pi ** 1.5), 1.0, delta=1e-6
        )

    def test_dimension_mismatch(self):
        with self.assertRaises(ValueError):
            norms(gaussian_profile(3), PARAMS)

    def test_zero_function(self):
        v = gaussian_grid()
        report = norms(v.with_values(np.zeros(v.n)), PARAMS)
        for name, value in report.as_dict().items():
            self.assertEqual(value, 0.0, msg=name)


class SolitonIdentitiesTest(SimpleTestCase):
    def test_cubic_soliton_is_critical(self):
        # √2 sech x solves -φ'' + φ - φ³ = 0
        cubic = PARAMS._replace(b=0.0)
        soliton = GridFunction.from_function(
            32.0, 2048, lambda x: math.sqrt(2) / np.cosh(x)
        )
        report = norms(soliton, cubic)
        self.assertLess(abs(report.K_omega), 1e-9)
        self.assertLess(abs(report.P), 1e-9)
        self.assertAlmostEqual(report.mass, 4.0, places=9)


class ResolutionTest(SimpleTestCase):
    def test_underresolved_grid(self):
        spike = gaussian_grid(n=256, width=0.05)
        with self.assertRaises(ResolutionTooCoarse):
            norms(spike, PARAMS)
        # the check can be switched off
        norms(spike, PARAMS, check_resolution=False)

    def test_underresolved_profile(self):
        r = np.arange(0, 10.0, 0.05)
        spike = RadialProfile.build(r, np.exp(-(r ** 2) / 0.01), 1)
        with self.assertRaises(ResolutionTooCoarse):
            norms(spike, PARAMS)

    def test_spectral_tail(self):
        self.assertLess(spectral_tail_fraction(gaussian_grid()), 1e-20)
        noisy = gaussian_grid().values + 0.1 * (-1) ** np.arange(1024)
        self.assertGreater(
            spectral_tail_fraction(GridFunction.from_values(16.0, noisy)),
            1e-3,
        )

    def test_radial_derivative_order(self):
        r = np.arange(0, 6.0, 0.01)
        derivative = radial_derivative(r, np.cos(r))
        np.testing.assert_allclose(derivative, -np.sin(r), atol=1e-8)


class RescaleTest(SimpleTestCase):
    def test_grid_scaling_follows_curve(self):
        v = gaussian_grid()
        curve = scaling_curve(v, PARAMS)
        for lam in (0.7, 1.5, 2.0):
            report = norms(rescale(v, lam), PARAMS)
            self.assertAlmostEqual(report.mass / v.mass, 1.0, delta=1e-10)
            self.assertAlmostEqual(
                report.E, float(curve.energy(lam)), delta=1e-8
            )
            self.assertAlmostEqual(
                report.P, float(curve.virial(lam)), delta=1e-8
            )
            self.assertAlmostEqual(
                report.K_omega, float(curve.nehari(lam)), delta=1e-8
            )

    def test_grid_scaling_stays_real(self):
        scaled = rescale(gaussian_grid(), 1.7)
        self.assertLess(np.max(np.abs(scaled.values.imag)), 1e-10)
        expected = math.sqrt(1.7) * np.exp(-((1.7 * scaled.x) ** 2) / 2)
        np.testing.assert_allclose(scaled.values.real, expected, atol=1e-10)

    def test_radial_scaling_follows_curve(self):
        params = Parameters(N=3, a=1.0, b=1.0, p=1.5, q=3.0, omega=1.0)
        v = gaussian_profile(3)
        curve = scaling_curve(v, params)
        for lam in (0.8, 1.3):
            report = norms(rescale(v, lam), params)
            self.assertAlmostEqual(report.mass / curve.mass, 1.0, delta=1e-6)
            self.assertAlmostEqual(
                report.E / float(curve.energy(lam)), 1.0, delta=1e-6
            )

    def test_identity_scaling(self):
        v = gaussian_grid()
        self.assertIs(rescale(v, 1.0), v)

    def test_out_of_box(self):
        wide = gaussian_grid(width=5.0)
        with self.assertRaises(ScalingOutOfBox):
            rescale(wide, 0.1)

    def test_non_positive_factor(self):
        with self.assertRaises(ValueError):
            rescale(gaussian_grid(), 0.0)


class CurveTest(SimpleTestCase):
    def test_curve_at_one_reproduces_report(self):
        v = gaussian_grid()
        report = norms(v, PARAMS)
        curve = scaling_curve(v, PARAMS, report=report)
        self.assertAlmostEqual(float(curve.energy(1.0)), report.E, places=12)
        self.assertAlmostEqual(float(curve.virial(1.0)), report.P, places=12)
        self.assertAlmostEqual(
            float(curve.nehari(1.0)), report.K_omega, places=12
        )
        self.assertEqual(curve.alpha, 1.0)
        self.assertEqual(curve.beta, 3.0)

    def test_virial_is_energy_derivative(self):
        # P(v^λ)/λ against centered differences of E(v^λ), measured on the
        # sum of the magnitudes of the derivative's terms
        curve = scaling_curve(gaussian_grid(), PARAMS)
        lambdas = np.concatenate([[0.5, 1.0, 2.0], np.logspace(-1, 1, 10)])
        for lam in lambdas:
            with self.subTest(lam=lam):
                h = 1e-5 * lam
                difference = (
                    float(curve.energy(lam + h))
                    - float(curve.energy(lam - h))
                ) / (2 * h)
                scale = (
                    2 * curve.c2 * lam
                    + curve.alpha * curve.c_alpha * lam ** (curve.alpha - 1)
                    + curve.beta * curve.c_beta * lam ** (curve.beta - 1)
                )
                derivative = float(curve.virial(lam)) / lam
                self.assertLess(abs(derivative - difference), 1e-6 * scale)
                self.assertAlmostEqual(
                    derivative, float(curve.denergy(lam)), delta=1e-12 * scale
                )


class H1DistanceTest(SimpleTestCase):
    def test_distance(self):
        v = gaussian_grid()
        self.assertEqual(h1_distance(v, v), 0.0)
        zero = v.with_values(np.zeros(v.n))
        self.assertAlmostEqual(
            h1_distance(v, zero), math.sqrt(1.5 * SQRT_PI), places=10
        )

    def test_grids_must_match(self):
        with self.assertRaises(ValueError):
            h1_distance(gaussian_grid(), gaussian_grid(n=512))
