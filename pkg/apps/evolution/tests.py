import math
import os
import tempfile

import numpy as np

from django.test import SimpleTestCase

from apps.base.columnar import read_table
from apps.base.exceptions import BoxMassLeak, HypothesisFailure, TooFewSamples
from apps.core_types.parameters import Parameters
from apps.core_types.representations import GridFunction, profile_on_grid
from apps.evolution.evolution import (
    BLOWUP,
    RAN_TO_HORIZON,
    TRACE_COLUMNS,
    EvolutionConfig,
    conservation_check,
    evolve,
    export_trace,
    monotonicity_check,
    virial_residual,
)
from apps.evolution.splitting import propagate, step
from apps.functionals.functionals import rescale
from apps.groundstate.solver import solve_ground_state

CANONICAL = Parameters(N=1, a=1.0, b=1.0, p=3.0, q=7.0, omega=1.0)
FREE = CANONICAL._replace(a=0.0, b=0.0)


def gaussian(L=32.0, n=1024, amplitude=1.0, width=1.0, center=0.0):
    return GridFunction.from_function(
        L,
        n,
        lambda x: amplitude * np.exp(-((x - center) ** 2) / (2 * width ** 2)),
    )


class StepTest(SimpleTestCase):
    def setUp(self):
        self.u0 = gaussian(L=16.0, n=512, amplitude=0.8, width=0.7)

    def test_rejects_non_positive_step(self):
        with self.assertRaises(ValueError):
            step(self.u0, 0.0, CANONICAL)

    def test_mass_preserved(self):
        u = propagate(self.u0, CANONICAL, 1e-3, 200)
        self.assertAlmostEqual(u.mass / self.u0.mass, 1.0, delta=1e-12)

    def test_second_order_in_time(self):
        coarse, mid, fine = (
            propagate(self.u0, CANONICAL, 0.2 / steps, steps).values
            for steps in (50, 100, 200)
        )
        ratio = np.max(np.abs(coarse - mid)) / np.max(np.abs(mid - fine))
        self.assertGreater(ratio, 3.5)
        self.assertLess(ratio, 4.5)

    def test_fourth_order_triple_jump(self):
        coarse, mid, fine = (
            propagate(self.u0, CANONICAL, 0.2 / steps, steps, order=4).values
            for steps in (10, 20, 40)
        )
        ratio = np.max(np.abs(coarse - mid)) / np.max(np.abs(mid - fine))
        self.assertGreater(ratio, 12.0)
        self.assertLess(ratio, 20.0)

    def test_rejects_unknown_order(self):
        with self.assertRaises(ValueError):
            step(self.u0, 1e-3, CANONICAL, order=3)
        with self.assertRaises(ValueError):
            EvolutionConfig(order=3).check()

    def test_time_reversal(self):
        for dealias, tolerance in ((False, 1e-10), (True, 1e-6)):
            with self.subTest(dealias=dealias):
                u = propagate(self.u0, CANONICAL, 1e-3, 200, dealias)
                u = propagate(u.conjugate(), CANONICAL, 1e-3, 200, dealias)
                error = np.max(np.abs(u.conjugate().values - self.u0.values))
                self.assertLess(error, tolerance)


class FreeEvolutionTest(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        config = EvolutionConfig(dt0=0.01, t_end=1.0, dealias=False)
        cls.trace = evolve(gaussian(), FREE, config)

    def test_variance_law(self):
        expected = math.sqrt(math.pi) / 2 * (1 + 4 * self.trace.times ** 2)
        np.testing.assert_allclose(self.trace.virial, expected, rtol=1e-6)
        self.assertEqual(self.trace.times[-1], 1.0)
        self.assertEqual(self.trace.verdict.kind, RAN_TO_HORIZON)

    def test_virial_identity(self):
        residual = virial_residual(self.trace)
        self.assertLess(residual.relative, 1e-6)

    def test_conservation(self):
        report = conservation_check(self.trace)
        self.assertTrue(report.holds, report.as_dict())

    def test_export(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = export_trace(self.trace, os.path.join(tmp, "trace.txt"))
            table = read_table(path)
        self.assertEqual(table.kind, "trace")
        self.assertEqual(tuple(table.columns), TRACE_COLUMNS)
        self.assertEqual(table.header["verdict"], RAN_TO_HORIZON)
        np.testing.assert_array_equal(
            table.columns["virial"], self.trace.virial
        )

    def test_too_few_samples(self):
        config = EvolutionConfig(dt0=0.01, t_end=0.03, dealias=False)
        trace = evolve(gaussian(), FREE, config)
        self.assertEqual(trace.size, 4)
        with self.assertRaises(TooFewSamples):
            virial_residual(trace)

    def test_mass_at_box_edge(self):
        with self.assertRaises(BoxMassLeak):
            evolve(gaussian(center=30.0), FREE)

    def test_rejects_radial_dimensions(self):
        with self.assertRaises(ValueError):
            evolve(gaussian(), FREE._replace(N=3))


class StandingWaveTest(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.ground = solve_ground_state(CANONICAL)
        cls.u0 = profile_on_grid(cls.ground.profile, 32.0, 1024)

    def test_modulus_and_phase(self):
        config = EvolutionConfig(dt0=2.5e-4, t_end=5.0, sample_interval=0.05)
        trace = evolve(self.u0, CANONICAL, config)
        self.assertEqual(trace.verdict.kind, RAN_TO_HORIZON)
        final = trace.final.values
        error = np.max(np.abs(np.abs(final) - np.abs(self.u0.values)))
        self.assertLess(error, 1e-6)
        phase = np.angle(final[512] * np.exp(-1j * CANONICAL.omega * 5.0))
        self.assertLess(abs(phase), 1e-5)

        scale = self.ground.diagnostics.grad2
        self.assertLess(np.max(np.abs(trace.P)), 1e-5 * scale)
        self.assertLess(np.max(np.abs(trace.K_omega)), 1e-5 * scale)
        report = conservation_check(trace)
        self.assertLess(report.mass_drift, 1e-12)
        self.assertTrue(report.holds, report.as_dict())

    def test_stretched_wave_stays_bounded(self):
        u0 = profile_on_grid(rescale(self.ground.profile, 0.97), 32.0, 1024)
        config = EvolutionConfig(dt0=5e-4, t_end=2.0, sample_interval=0.005)
        trace = evolve(u0, CANONICAL, config)
        self.assertEqual(trace.verdict.kind, RAN_TO_HORIZON)
        self.assertLess(trace.grad_norm.max(), 2 * trace.grad_norm[0])
        self.assertTrue(virial_residual(trace).holds())

    def test_monotonicity_gate(self):
        config = EvolutionConfig(dt0=1e-3, t_end=0.1)
        trace = evolve(self.u0, CANONICAL, config)
        with self.assertRaises(HypothesisFailure):
            monotonicity_check(trace, self.ground)


class BlowupTest(SimpleTestCase):
    """Compressed ground states above ω₁ collapse in finite time"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.params = CANONICAL.with_omega(16.0)
        cls.ground = solve_ground_state(cls.params)
        cls.traces = {lam: cls.run_scaled(lam) for lam in (1.05, 1.1)}

    @classmethod
    def run_scaled(cls, lam):
        # the collapsing core must stay resolved and the shed mass away
        # from the box edge until detection
        u0 = profile_on_grid(rescale(cls.ground.profile, lam), 12.0, 32768)
        config = EvolutionConfig(
            dt0=1e-4, t_end=2.0, sample_interval=1e-3, order=4
        )
        return evolve(u0, cls.params, config)

    def test_compressed_ground_state_blows_up(self):
        trace = self.traces[1.1]
        self.assertEqual(trace.verdict.kind, BLOWUP)
        self.assertTrue(0 < trace.verdict.t < 2.0)
        self.assertGreater(trace.grad_norm.max(), trace.grad_norm[0])
        self.assertLess(trace.verdict.t, self.traces[1.05].verdict.t)

    def test_flow_stays_in_blowup_set(self):
        trace = self.traces[1.05]
        self.assertEqual(trace.verdict.kind, BLOWUP)
        report = monotonicity_check(trace, self.ground)
        self.assertGreaterEqual(report.samples, 3)
        self.assertLess(report.max_P, report.bound + 1e-6)
        self.assertLess(report.bound, 0)

    def test_virial_identity_before_collapse(self):
        for lam, trace in self.traces.items():
            with self.subTest(lam=lam):
                healthy = trace.healthy_prefix()
                self.assertGreaterEqual(healthy, 10)
                self.assertLess(healthy, trace.size)
                residual = virial_residual(trace)
                self.assertTrue(residual.holds(), residual.as_dict())
