import numpy as np

from django.test import SimpleTestCase

from apps.base.exceptions import (
    HypothesisFailure,
    NoSignChange,
    NotFourPoint,
    NotPositiveEnergy,
)
from apps.core_types.curves import ScalingCurve
from apps.core_types.parameters import Parameters
from apps.core_types.representations import profile_on_grid
from apps.functionals.functionals import norms, rescale, scaling_curve
from apps.groundstate.solver import solve_ground_state
from apps.scaling_analysis.analysis import (
    AnalysisConfig,
    annotate,
    critical_points,
    ground_reference,
    instability_window,
    lemma2_check,
    lemma2_inputs,
    lemmaEP_check,
    locate_omega1,
    membership,
    nehari_slope,
    random_curves,
    verify_shape,
    virial_projection,
)

CANONICAL = Parameters(N=1, a=1.0, b=1.0, p=3.0, q=7.0, omega=1.0)
# Far enough above ω₁ that E(φ_ω) > 0
UNSTABLE = CANONICAL.with_omega(16.0)


def sign_changes(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    signs = np.sign(values)
    return grid[np.flatnonzero(signs[:-1] * signs[1:] < 0)]


def v_mass(v) -> float:
    return norms(v, UNSTABLE).mass


class CriticalPointsTest(SimpleTestCase):
    def test_virial_zero_puts_lambda3_at_one(self):
        # c2 = (α c_alpha + β c_beta)/2 makes P(v) = 0
        curve = ScalingCurve(
            c2=0.35,
            c_alpha=0.1,
            c_beta=0.2,
            alpha=1.0,
            beta=3.0,
            p=3.0,
            q=7.0,
            omega=1.0,
            mass=1.0,
        )
        self.assertAlmostEqual(float(curve.virial(1.0)), 0.0, places=15)
        lambda1, lambda2, lambda3, lambda4 = critical_points(curve)
        self.assertAlmostEqual(lambda3, 1.0, delta=1e-8)
        self.assertTrue(0 < lambda1 < lambda2 < lambda3 < lambda4)

    def test_pure_quadratic_rejected(self):
        curve = ScalingCurve(1.0, 0.0, 0.0, 1.0, 3.0, 3.0, 7.0, 1.0, 1.0)
        with self.assertRaises(NotFourPoint):
            critical_points(curve)

    def test_missing_lower_power_rejected(self):
        curve = ScalingCurve(1.0, 0.0, 0.2, 1.0, 3.0, 3.0, 7.0, 1.0, 1.0)
        with self.assertRaises(NotFourPoint):
            critical_points(curve)

    def test_negative_energy_rejected(self):
        curve = ScalingCurve(0.1, 0.3, 0.3, 1.0, 3.0, 3.0, 7.0, 1.0, 1.0)
        with self.assertRaises(NotPositiveEnergy):
            critical_points(curve)

    def test_random_curves_against_dense_scan(self):
        grid = np.logspace(-4, 4, 1_000_000)
        spacing = grid * (10 ** (8 / (len(grid) - 1)) - 1)
        for curve in random_curves(np.random.default_rng(2024), 100):
            points = critical_points(curve)
            flat = sign_changes(
                curve.denergy(grid) / grid ** (curve.alpha - 1), grid
            )
            zeros = sign_changes(
                curve.energy(grid) / grid ** curve.alpha, grid
            )
            oracle = (flat[0], zeros[0], flat[1], zeros[1])
            for found, expected in zip(points, oracle):
                index = np.searchsorted(grid, expected)
                self.assertLessEqual(abs(found - expected), spacing[index])

    def test_shape_of_random_curves(self):
        for curve in random_curves(np.random.default_rng(11), 20):
            shape = verify_shape(annotate(curve))
            self.assertTrue(shape.holds, shape)

    def test_annotate(self):
        (curve,) = random_curves(np.random.default_rng(3), 1)
        annotated = annotate(curve)
        self.assertIsNone(curve.critical_points)
        self.assertEqual(annotated.critical_points, critical_points(curve))


class GroundStateScalingTest(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.ground = solve_ground_state(UNSTABLE)
        cls.curve = scaling_curve(
            cls.ground.profile, UNSTABLE, report=cls.ground.diagnostics
        )

    def test_ground_state_energy_positive(self):
        self.assertGreater(self.ground.diagnostics.E, 0)

    def test_ground_state_sits_at_lambda3(self):
        self.assertAlmostEqual(annotate(self.curve).lambda3, 1.0, delta=1e-5)

    def test_nehari_limit_at_small_scaling(self):
        omega_mass = UNSTABLE.omega * self.curve.mass
        self.assertAlmostEqual(
            float(self.curve.nehari(1e-3)) / omega_mass, 1.0, delta=1e-4
        )

    def test_nehari_slope(self):
        slope = nehari_slope(self.ground)
        self.assertTrue(slope.negative)
        self.assertAlmostEqual(
            slope.curve / slope.finite_difference, 1.0, delta=1e-6
        )
        self.assertLess(slope.relative_gap, 1e-5)

    def test_instability_window(self):
        window = instability_window(self.ground)
        self.assertGreater(window, 1.05)
        self.assertLessEqual(window, annotate(self.curve).lambda4)
        self.assertLess(float(self.curve.nehari(0.5 * (1 + window))), 0)

    def test_grid_reference(self):
        grid = profile_on_grid(self.ground.profile, 32.0, 4096)
        reference = ground_reference(self.ground, like=grid)
        d = self.ground.diagnostics
        self.assertAlmostEqual(reference.mass / d.mass, 1.0, delta=1e-8)
        self.assertAlmostEqual(reference.E / d.E, 1.0, delta=1e-5)
        self.assertIs(ground_reference(self.ground), d)


class MembershipTest(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.ground = solve_ground_state(UNSTABLE)

    def test_ground_state_on_boundary(self):
        verdict = membership(self.ground.profile, self.ground)
        self.assertFalse(verdict.in_B)
        self.assertFalse(verdict.checks["energy_below_ground"].holds)

    def test_compressed_ground_state(self):
        verdict = membership(rescale(self.ground.profile, 1.05), self.ground)
        self.assertTrue(verdict.in_B, verdict.as_dict())
        for condition in verdict.checks.values():
            self.assertGreaterEqual(condition.margin, 0)

    def test_stretched_ground_state(self):
        verdict = membership(rescale(self.ground.profile, 0.5), self.ground)
        self.assertFalse(verdict.in_B)
        self.assertFalse(verdict.checks["virial_negative"].holds)

    def test_mass_condition(self):
        heavier = self.ground.profile.with_values(
            1.01 * self.ground.profile.values
        )
        verdict = membership(heavier, self.ground)
        self.assertFalse(verdict.checks["mass"].holds)

    def test_conditions_evaluated_independently(self):
        v = rescale(self.ground.profile, 1.05)
        loose = membership(v, self.ground)
        strict = membership(v, self.ground, tolerance=1e-1)
        self.assertEqual(loose.checks["mass"], strict.checks["mass"])
        for name, condition in loose.checks.items():
            self.assertEqual(condition.value, strict.checks[name].value)

    def test_stable_regime_rejected(self):
        ground = solve_ground_state(CANONICAL)
        with self.assertRaises(HypothesisFailure):
            membership(ground.profile, ground)


class InequalityTest(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.ground = solve_ground_state(UNSTABLE)

    def test_action_bound_on_faster_ground_states(self):
        omegas = np.geomspace(20.0, 64.0, 20)
        for v in lemma2_inputs(UNSTABLE, omegas):
            report = lemma2_check(v, self.ground)
            self.assertTrue(report.holds, report.as_dict())
            self.assertTrue(0 < report.lambda0 < 1)
            scale = report.S_omega
            self.assertLess(abs(report.K_at_lambda0), 1e-10 * scale)

    def test_action_bound_on_projected_inputs(self):
        (v,) = lemma2_inputs(UNSTABLE, [32.0])
        bump = 1 + 0.05 * np.exp(-32 * v.r ** 2)
        bumped = v.with_values(v.values * bump)
        bumped = bumped.with_values(
            bumped.values * np.sqrt(v_mass(v) / v_mass(bumped))
        )
        projected = virial_projection(bumped, UNSTABLE)
        report = lemma2_check(projected, self.ground)
        self.assertGreater(report.margin, 0)

    def test_action_bound_rejects_ground_state(self):
        with self.assertRaises(HypothesisFailure):
            lemma2_check(self.ground.profile, self.ground)

    def test_lemma2_inputs_above_omega(self):
        with self.assertRaises(ValueError):
            lemma2_inputs(UNSTABLE, [8.0])

    def test_energy_virial_bound_along_window(self):
        window = instability_window(self.ground)
        for lam in np.linspace(1.0, window, 22)[1:-1]:
            v = rescale(self.ground.profile, lam)
            report = lemmaEP_check(v, self.ground)
            self.assertTrue(report.holds, report.as_dict())
            self.assertGreaterEqual(report.slack, 0)

    def test_energy_virial_chain(self):
        report = lemmaEP_check(
            rescale(self.ground.profile, 1.05), self.ground
        )
        # λ₀ and λ₃ both sit at 1/1.05 for a rescaled ground state
        self.assertAlmostEqual(report.lambda3, 1 / 1.05, delta=1e-5)
        self.assertAlmostEqual(report.lambda0, 1 / 1.05, delta=1e-5)
        slack = 1e-6 * self.ground.diagnostics.grad2
        chain = report.chain
        for lower, upper in zip(chain, chain[1:]):
            self.assertLessEqual(lower, upper + slack)

    def test_energy_virial_bound_requires_membership(self):
        with self.assertRaises(HypothesisFailure):
            lemmaEP_check(self.ground.profile, self.ground)


class Omega1Test(SimpleTestCase):
    def test_locate_omega1(self):
        report = locate_omega1(CANONICAL, (1.0, 16.0))
        self.assertTrue(report.consistent)
        lo, hi = report.bracket
        self.assertLessEqual(hi / lo - 1, 1e-3)
        below = solve_ground_state(CANONICAL.with_omega(0.9 * report.omega1))
        above = solve_ground_state(CANONICAL.with_omega(1.1 * report.omega1))
        self.assertLess(below.diagnostics.E, 0)
        self.assertGreater(above.diagnostics.E, 0)

    def test_degenerate_bracket(self):
        with self.assertRaises(NoSignChange):
            locate_omega1(CANONICAL, (4.0, 4.0))

    def test_bracket_without_crossing(self):
        with self.assertRaises(NoSignChange):
            locate_omega1(CANONICAL, (16.0, 64.0))


class AnalysisConfigTest(SimpleTestCase):
    def test_defaults_valid(self):
        AnalysisConfig().check()

    def test_rejects_stable_scalings(self):
        with self.assertRaises(ValueError):
            AnalysisConfig(lambdas=(0.9, 1.1)).check()
