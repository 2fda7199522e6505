import filecmp
import glob
import io
import json
import os
import tempfile

import numpy as np

from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from apps.base.columnar import read_table
from apps.base.exceptions import ConfigParse, MissingArtifacts
from apps.experiments.config import (
    CANONICAL,
    ExperimentConfig,
    GridConfig,
    load_config,
    parse_config,
)
from apps.experiments.plotdata import PLOT_DIR, emit_plotdata
from apps.experiments.runner import MANIFEST, SUMMARY, TIMESTAMP, run

CONFIG_DIR = os.path.join(settings.BASE_DIR, "configs")

FREE = {
    "experiment": "free_benchmark",
    "grid": {"L": 32.0, "n": 1024},
    "evolution": {"dt0": 0.01, "t_end": 1.0, "dealias": False},
}


def read_json(path):
    with open(path) as f:
        return json.load(f)


class ParseConfigTest(SimpleTestCase):
    def test_defaults(self):
        config = parse_config({"experiment": "ground_state"})
        self.assertEqual(config.params, CANONICAL)
        self.assertEqual(config.grid, GridConfig())
        self.assertEqual(config.seed, 0)
        self.assertTrue(config.run_dir.endswith("ground_state"))

    def test_sections(self):
        config = parse_config(
            {
                "experiment": "instability_demo",
                "params": {"omega": 16, "N": 1},
                "analysis": {"lambdas": [1.05, 1.1]},
                "evolution": {"dealias": False, "t_end": 0.5},
                "sweep": {"omega_factor": None},
                "seed": 7,
            }
        )
        self.assertEqual(config.params.omega, 16.0)
        self.assertEqual(config.params.q, 7.0)
        self.assertEqual(config.analysis.lambdas, (1.05, 1.1))
        self.assertFalse(config.evolution.dealias)
        self.assertEqual(config.evolution.t_end, 0.5)
        self.assertIsNone(config.sweep.omega_factor)
        self.assertEqual(config.seed, 7)

    def test_unknown_keys(self):
        documents = (
            {"experiment": "ground_state", "verbose": True},
            {"experiment": "ground_state", "params": {"omgea": 2.0}},
            {"experiment": "ground_state", "evolution": {"dt": 1e-3}},
        )
        for document in documents:
            with self.subTest(document=document):
                with self.assertRaises(ConfigParse):
                    parse_config(document)

    def test_invalid_values(self):
        documents = (
            {},
            [],
            {"experiment": "no_such_experiment"},
            {"experiment": "ground_state", "params": {"N": "one"}},
            {"experiment": "ground_state", "params": []},
            {"experiment": "ground_state", "params": {"p": 6.0}},
            {"experiment": "ground_state", "shooting": {"phi0_bracket": [1]}},
            {"experiment": "ground_state", "analysis": {"lambdas": [0.9]}},
            {"experiment": "free_benchmark", "grid": {"n": 1000}},
        )
        for document in documents:
            with self.subTest(document=document):
                with self.assertRaises(ConfigParse):
                    parse_config(document)

    def test_load_errors(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "broken.json")
            with open(path, "w") as f:
                f.write("{experiment: ")
            with self.assertRaises(ConfigParse):
                load_config(path)
            with self.assertRaises(ConfigParse):
                load_config(os.path.join(tmp, "missing.json"))

    def test_shipped_configs(self):
        paths = sorted(glob.glob(os.path.join(CONFIG_DIR, "*.json")))
        self.assertTrue(paths)
        for path in paths:
            with self.subTest(path=path):
                self.assertIsInstance(load_config(path), ExperimentConfig)

    def test_echo_is_json(self):
        config = parse_config(FREE)
        echo = json.loads(json.dumps(config.as_dict()))
        self.assertEqual(echo["grid"], {"L": 32.0, "n": 1024})
        self.assertEqual(echo["params"]["q"], 7.0)


class FreeBenchmarkTest(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def run_free(self, name):
        config = parse_config(
            dict(FREE, output_dir=os.path.join(self.tmp.name, name))
        )
        return run(config)

    def test_checks_pass(self):
        result = self.run_free("a")
        self.assertTrue(result.passed, [c.line for c in result.failures])
        summary = read_json(os.path.join(result.run_dir, SUMMARY))
        self.assertTrue(summary["passed"])
        for check in summary["checks"]:
            self.assertTrue(check["line"].startswith("PASS evolution:"))

        manifest = read_json(os.path.join(result.run_dir, MANIFEST))
        self.assertEqual(manifest["config"]["experiment"], "free_benchmark")
        self.assertNotIn("output_dir", manifest["config"])
        self.assertIn("trace_free.txt", manifest["artifacts"])
        self.assertIn(SUMMARY, manifest["artifacts"])
        self.assertTrue(
            os.path.exists(os.path.join(result.run_dir, TIMESTAMP))
        )

    def test_deterministic(self):
        first, second = self.run_free("a"), self.run_free("b")
        names = first.artifacts + [MANIFEST]
        self.assertEqual(names, second.artifacts + [MANIFEST])
        match, mismatch, errors = filecmp.cmpfiles(
            first.run_dir, second.run_dir, names, shallow=False
        )
        self.assertEqual(mismatch + errors, [])

    def test_plotdata(self):
        result = self.run_free("a")
        (path,) = emit_plotdata(result.run_dir)
        plot_dir = os.path.join(result.run_dir, PLOT_DIR)
        self.assertEqual(os.path.dirname(path), plot_dir)
        table = read_table(path)
        self.assertEqual(table.kind, "trace_plot")
        self.assertEqual(table.header["verdict"], "RAN_TO_HORIZON")
        self.assertLess(np.max(np.abs(table.columns["mass_drift"])), 1e-12)


class PlotdataTest(SimpleTestCase):
    def test_missing_run(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(MissingArtifacts):
                emit_plotdata(tmp)
            with self.assertRaises(MissingArtifacts):
                emit_plotdata(os.path.join(tmp, "nothing"))

    def test_run_without_tables(self):
        with tempfile.TemporaryDirectory() as tmp:
            with open(os.path.join(tmp, MANIFEST), "w") as f:
                f.write("{}\n")
            with self.assertRaises(MissingArtifacts):
                emit_plotdata(tmp)


class GroundStateExperimentTest(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_closed_form_soliton(self):
        config = parse_config(
            {
                "experiment": "ground_state",
                "params": {"a": 0.0},
                "output_dir": self.tmp.name,
            }
        )
        result = run(config)
        self.assertTrue(result.passed, [c.line for c in result.failures])
        lines = [check.line for check in result.checks]
        self.assertTrue(any("closed-form soliton" in line for line in lines))

    def test_scaling_curve_plot(self):
        config = parse_config(
            {
                "experiment": "ground_state",
                "params": {"omega": 16.0},
                "output_dir": self.tmp.name,
            }
        )
        run(config)
        (path,) = emit_plotdata(self.tmp.name)
        table = read_table(path)
        self.assertEqual(table.kind, "scaling_curve")
        lam, energy = table.columns["lambda"], table.columns["E"]
        lambda2 = float(table.header["lambda2"])
        lambda4 = float(table.header["lambda4"])
        self.assertAlmostEqual(float(table.header["lambda3"]), 1.0, delta=1e-5)
        # sign pattern (-, +, -) away from the zeros
        below = lam < 0.99 * lambda2
        between = (lam > 1.01 * lambda2) & (lam < 0.99 * lambda4)
        above = lam > 1.01 * lambda4
        self.assertTrue(np.all(energy[below] < 0))
        self.assertTrue(np.all(energy[between] > 0))
        self.assertTrue(np.all(energy[above] < 0))


class OmegaSweepExperimentTest(SimpleTestCase):
    def test_sweep_and_crossing(self):
        with tempfile.TemporaryDirectory() as tmp:
            config = parse_config(
                {
                    "experiment": "omega_sweep",
                    "sweep": {"omega_max": 64.0, "points": 8},
                    "output_dir": tmp,
                }
            )
            result = run(config)
            self.assertTrue(result.passed, [c.line for c in result.failures])
            (path,) = emit_plotdata(tmp)
            table = read_table(path)
        self.assertEqual(table.kind, "omega_crossing")
        self.assertTrue(np.all(np.diff(table.columns["S_omega"]) > 0))
        omega1 = float(table.header["omega1"])
        self.assertTrue(1.0 < omega1 < 16.0)


class InstabilityDemoTest(SimpleTestCase):
    """Scaled ground states at ω = 4·ω₁ all collapse, faster as λ grows"""

    def test_shipped_demo(self):
        config = load_config(os.path.join(CONFIG_DIR, "instability_demo.json"))
        with tempfile.TemporaryDirectory() as tmp:
            result = run(config._replace(output_dir=tmp))
            table = read_table(os.path.join(result.run_dir, "instability.txt"))
        self.assertTrue(result.passed, [c.line for c in result.failures])
        np.testing.assert_allclose(table.columns["lambda"], [1.02, 1.05, 1.1])
        np.testing.assert_array_equal(table.columns["in_B"], 1.0)
        np.testing.assert_array_equal(table.columns["blowup"], 1.0)
        self.assertTrue(np.all(np.diff(table.columns["t_detect"]) < 0))
        virial = [c for c in result.checks if "virial identity" in c.invariant]
        self.assertEqual(len(virial), 3)
        self.assertTrue(all(c.passed for c in virial))


class CommandTest(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def write_config(self, document):
        path = os.path.join(self.tmp.name, "config.json")
        with open(path, "w") as f:
            json.dump(document, f)
        return path

    def test_run_and_plot(self):
        path = self.write_config(FREE)
        run_dir = os.path.join(self.tmp.name, "run")
        out = io.StringIO()
        call_command("run", path, output_dir=run_dir, threads=1, stdout=out)
        self.assertIn("PASS evolution: free variance law", out.getvalue())
        self.assertIn("all 3 checks passed", out.getvalue())

        out = io.StringIO()
        call_command("emit_plotdata", run_dir, stdout=out)
        self.assertIn(PLOT_DIR, out.getvalue())

    def test_config_error(self):
        path = self.write_config(dict(FREE, grid={"size": 1024}))
        with self.assertRaisesMessage(CommandError, "config_parse"):
            call_command("run", path, stdout=io.StringIO())

    def test_missing_artifacts(self):
        with self.assertRaisesMessage(CommandError, "missing_artifacts"):
            call_command("emit_plotdata", self.tmp.name, verbose=True)
