import math
import os
import tempfile
from types import SimpleNamespace
from unittest import mock

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from django.test import SimpleTestCase

from apps.base.exceptions import (
    BracketingFailure,
    MissingArtifacts,
    StiffnessFailure,
    TruncationTooSmall,
)
from apps.core_types.parameters import Parameters
from apps.functionals.functionals import scaling_curve
from apps.groundstate.shooting import (
    CROSSES_ZERO,
    DECAYS,
    DIVERGES,
    ShootingConfig,
    balance_amplitude,
    shoot,
)
from apps.groundstate.solver import (
    export_ground_state,
    first_integral_amplitude,
    import_ground_state,
    linear_tail,
    single_power_soliton,
    solve_ground_state,
    solve_omega_sweep,
    sweep_columns,
)

CANONICAL = Parameters(N=1, a=1.0, b=1.0, p=3.0, q=7.0, omega=1.0)
SEPTIC = CANONICAL._replace(a=0.0)
CUBIC = CANONICAL._replace(b=0.0)


class ShootTest(SimpleTestCase):
    def test_septic_soliton_amplitude_decays(self):
        self.assertEqual(shoot(4 ** (1 / 6), SEPTIC), DECAYS)

    def test_above_amplitude_crosses(self):
        self.assertEqual(shoot(2.0, SEPTIC), CROSSES_ZERO)

    def test_below_amplitude_diverges(self):
        self.assertEqual(shoot(0.5, SEPTIC), DIVERGES)

    def test_radial_classes(self):
        params = Parameters(N=3, a=1.0, b=1.0, p=2.0, q=4.0, omega=1.0)
        phi_m = balance_amplitude(params)
        self.assertEqual(shoot(0.5 * phi_m, params), DIVERGES)
        self.assertEqual(shoot(20 * phi_m, params), CROSSES_ZERO)

    def test_positive_amplitude_required(self):
        with self.assertRaises(ValueError):
            shoot(0.0, CANONICAL)

    def test_one_dimensional_shots_integrate(self):
        for phi0, verdict in ((2.0, CROSSES_ZERO), (0.95, DIVERGES)):
            with self.subTest(phi0=phi0), mock.patch(
                "apps.groundstate.shooting.solve_ivp", wraps=solve_ivp
            ) as spy:
                self.assertEqual(shoot(phi0, CANONICAL), verdict)
                self.assertEqual(spy.call_count, 1)

    def test_first_integral_contradiction(self):
        # U(0.95) < 0 sends the trajectory back up, never across zero
        crossing = SimpleNamespace(
            event_names=[CROSSES_ZERO, "turnaround", "growth", "level"],
            t_events=[[1.0], [], [], []],
        )
        with mock.patch(
            "apps.groundstate.shooting.integrate", return_value=crossing
        ):
            with self.assertRaises(StiffnessFailure):
                shoot(0.95, CANONICAL)


class SinglePowerTest(SimpleTestCase):
    def test_septic_soliton(self):
        ground = solve_ground_state(SEPTIC)
        self.assertAlmostEqual(ground.phi0 / 4 ** (1 / 6), 1.0, delta=1e-7)
        exact = 4 ** (1 / 6) / np.cosh(3 * ground.profile.r) ** (1 / 3)
        error = np.max(np.abs(ground.profile.values - exact))
        self.assertLess(error, 1e-6)

    def test_cubic_soliton(self):
        ground = solve_ground_state(CUBIC)
        exact = single_power_soliton(CUBIC, ground.profile.r)
        np.testing.assert_allclose(exact[0], math.sqrt(2))
        error = np.max(np.abs(ground.profile.values - exact))
        self.assertLess(error, 1e-6)

    def test_oracle_needs_single_power(self):
        with self.assertRaises(ValueError):
            single_power_soliton(CANONICAL, [0.0])


class DoublePowerTest(SimpleTestCase):
    def test_first_integral_amplitude(self):
        ground = solve_ground_state(CANONICAL)
        # independent root of 1 = φ²/2 + φ⁶/4
        oracle = brentq(
            lambda phi: phi ** 2 / 2 + phi ** 6 / 4 - 1, 0.5, 2.0, xtol=1e-15
        )
        self.assertAlmostEqual(ground.phi0 / oracle, 1.0, delta=1e-8)
        self.assertAlmostEqual(
            first_integral_amplitude(CANONICAL) / oracle, 1.0, delta=1e-12
        )

    def test_identities(self):
        for omega in (1.0, 4.0, 16.0, 64.0):
            with self.subTest(omega=omega):
                ground = solve_ground_state(CANONICAL.with_omega(omega))
                self.assertLessEqual(ground.nehari_residual, 1e-6)
                self.assertLessEqual(ground.virial_residual, 1e-6)
                self.assertTrue(ground.profile.is_positive_decreasing())
                self.assertTrue(ground.profile.tail_captured())
                self.assertAlmostEqual(
                    ground.profile.tail_rate / math.sqrt(omega),
                    1.0,
                    delta=1e-3,
                )

    def test_nehari_minimality(self):
        """S_ω(φ_ω) is below S_ω on the Nehari projections of φ_ω^λ"""
        ground = solve_ground_state(CANONICAL)
        d = ground.diagnostics
        curve = scaling_curve(ground.profile, CANONICAL, report=d)
        p, q = CANONICAL.p, CANONICAL.q
        for lam in (0.9, 1.1):
            quadratic = 2 * curve.c2 * lam ** 2 + curve.mass
            lp = (p + 1) * curve.c_alpha * lam ** curve.alpha
            lq = (q + 1) * curve.c_beta * lam ** curve.beta
            t = brentq(
                lambda t: quadratic - t ** (p - 1) * lp - t ** (q - 1) * lq,
                1e-6,
                10.0,
            )
            action = (
                t ** 2 * quadratic / 2
                - t ** (p + 1) * lp / (p + 1)
                - t ** (q + 1) * lq / (q + 1)
            )
            self.assertGreater(action, d.S_omega)

    def test_radial_space(self):
        params = Parameters(N=3, a=1.0, b=1.0, p=2.0, q=4.0, omega=1.0)
        ground = solve_ground_state(params)
        self.assertTrue(ground.profile.is_positive_decreasing())
        self.assertLessEqual(ground.nehari_residual, 1e-5)
        self.assertLessEqual(ground.virial_residual, 1e-5)


class FailureTest(SimpleTestCase):
    def test_truncated_profile(self):
        with self.assertRaises(TruncationTooSmall):
            solve_ground_state(CANONICAL, ShootingConfig(Rmax=12.0))
        with self.assertRaises(TruncationTooSmall):
            solve_ground_state(CANONICAL, ShootingConfig(Rmax=4.0))

    def test_bracket_without_sign_change(self):
        config = ShootingConfig(phi0_bracket=(0.1, 0.2))
        with self.assertRaises(BracketingFailure):
            solve_ground_state(CANONICAL, config)

    def test_explicit_bracket(self):
        config = ShootingConfig(phi0_bracket=(0.5, 3.0))
        ground = solve_ground_state(CANONICAL, config)
        self.assertAlmostEqual(
            ground.phi0 / first_integral_amplitude(CANONICAL), 1.0, delta=1e-8
        )

    def test_invalid_bracket(self):
        with self.assertRaises(ValueError):
            solve_ground_state(CANONICAL, ShootingConfig(phi0_bracket=(2, 1)))


class LinearTailTest(SimpleTestCase):
    def test_closed_forms(self):
        r = np.linspace(5.0, 20.0, 7)
        np.testing.assert_allclose(
            linear_tail(r, 5.0, 4.0, 1), np.exp(-2 * (r - 5)), rtol=1e-12
        )
        np.testing.assert_allclose(
            linear_tail(r, 5.0, 1.0, 3),
            5.0 / r * np.exp(-(r - 5)),
            rtol=1e-12,
        )


class SweepTest(SimpleTestCase):
    omegas = (1.0, 4.0, 16.0, 64.0, 256.0, 1024.0)

    def test_sweep_shape(self):
        grounds = solve_omega_sweep(self.omegas, CANONICAL)
        columns = sweep_columns(grounds)
        np.testing.assert_array_equal(columns["omega"], self.omegas)

        # d(ω) increases, lp/lq decreases, E changes sign once
        self.assertTrue(np.all(np.diff(columns["S_omega"]) > 0))
        self.assertTrue(np.all(np.diff(columns["lp_lq_ratio"]) < 0))
        self.assertLess(columns["E"][0], 0)
        self.assertGreater(columns["E"][-1], 0)
        self.assertEqual(np.count_nonzero(np.diff(np.sign(columns["E"]))), 1)

    def test_single_point_sweep(self):
        (ground,) = solve_omega_sweep([4.0], CANONICAL)
        direct = solve_ground_state(CANONICAL.with_omega(4.0))
        self.assertEqual(ground.phi0, direct.phi0)

    def test_threaded_sweep_matches(self):
        sequential = solve_omega_sweep(self.omegas[:3], CANONICAL, threads=1)
        threaded = solve_omega_sweep(self.omegas[:3], CANONICAL, threads=2)
        for a, b in zip(sequential, threaded):
            self.assertAlmostEqual(a.phi0 / b.phi0, 1.0, delta=1e-9)

    def test_rejects_unsorted(self):
        with self.assertRaises(ValueError):
            solve_omega_sweep([4.0, 1.0], CANONICAL)


class StorageTest(SimpleTestCase):
    def test_export_import(self):
        ground = solve_ground_state(CANONICAL)
        with tempfile.TemporaryDirectory() as tmp:
            path = export_ground_state(ground, os.path.join(tmp, "gs.txt"))
            loaded = import_ground_state(path)
        self.assertEqual(loaded.params, CANONICAL)
        self.assertEqual(loaded.phi0, ground.phi0)
        np.testing.assert_array_equal(
            loaded.profile.values, ground.profile.values
        )
        self.assertEqual(loaded.diagnostics, ground.diagnostics)

    def test_missing_file(self):
        with self.assertRaises(MissingArtifacts):
            import_ground_state("/nonexistent/gs.txt")
