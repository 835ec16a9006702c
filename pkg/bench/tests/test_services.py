import json
import tempfile
from io import StringIO
from pathlib import Path

from unittest import mock

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase

from bench.config import ExperimentConfig
from bench.management.base import EXIT_CONFIG, EXIT_GATE
from bench.models import ExperimentRun, ReferenceSolution, ReplicationResult, ReplicationStatus, RunStatus
from bench.services import (
	REFERENCE_CHECK_SCALE, artifact_stem, build_model, check_reference, compute_reference, emit_bench_outputs,
	evaluation_panel, load_reference, mlsmc_config, record_replication, reference_paths, run_mse_vs_cost,
	run_rate_check, run_replication, smc_particles,
)
from core.exceptions import ConfigurationError
from core.rng import RngStream

# Small enough to run in seconds: 6 spiral points, widths 2..16.
TINY = dict(
	task="classification", depth=2, levels=(2, 3), replications=2, budget_base=4000.0, budget_growth=2.0,
	n_steps=1, min_samples=20, reference_level=4, reference_factor=2.0, n_test=4, data_size=3, seed=5,
)


class ServiceTestCase(TestCase):
	def setUp(self):
		self.tmp = tempfile.TemporaryDirectory()
		self.out = Path(self.tmp.name)
		self.config = ExperimentConfig(**TINY)

	def tearDown(self):
		self.tmp.cleanup()


class SetupTests(ServiceTestCase):
	def test_model_and_panel(self):
		model = build_model(self.config, 5)
		self.assertEqual((model.input_dim, model.output_dim, model.depth), (2, 2, 2))
		panel = evaluation_panel(self.config, 5)
		self.assertEqual(panel.shape, (4, 2))
		np.testing.assert_array_equal(panel, evaluation_panel(self.config, 5))

	def test_budget_split(self):
		model = build_model(self.config, 5)
		cfg = mlsmc_config(self.config, model, 3, self.config.budget(3))
		self.assertEqual(cfg.L, 3)
		self.assertTrue(all(p >= 20 for p in cfg.sample_sizes))
		self.assertEqual(smc_particles(self.config, model, 2, 4000.0), 4000 // 22)

	def test_budget_below_floor(self):
		model = build_model(self.config, 5)
		with self.assertRaises(ConfigurationError):
			mlsmc_config(self.config, model, 3, 100.0)

	def test_missing_reference(self):
		with self.assertRaises(ConfigurationError):
			load_reference(self.config, 5, self.out)


class ReferenceTests(ServiceTestCase):
	def test_reference_is_recorded_and_resumable(self):
		first = compute_reference(self.config, 5, self.out)
		self.assertEqual(first.values.shape, (4, 2))
		self.assertTrue(first.path.exists())
		self.assertEqual(ReferenceSolution.objects.count(), 1)
		self.assertEqual(ExperimentRun.objects.get(command="reference").status, RunStatus.DONE)
		ckpts = list((self.out / "checkpoints").rglob("population_*.mlbn"))
		self.assertEqual(len(ckpts), 4)
		meta = json.loads(reference_paths(self.config, 5, self.out)[1].read_text())
		self.assertEqual((meta["reference_level"], meta["hidden_width"]), (4, 16))
		self.assertEqual(meta["checksum"], first.checksum)

		again = compute_reference(self.config, 5, self.out)
		self.assertEqual(again.checksum, first.checksum)
		self.assertEqual(ReferenceSolution.objects.count(), 1)
		np.testing.assert_array_equal(load_reference(self.config, 5, self.out), first.values)

	def test_tampered_reference(self):
		result = compute_reference(self.config, 5, self.out, checkpoints=False)
		result.path.write_text(result.path.read_text() + "0.0,0.0\n")
		with self.assertRaises(ConfigurationError):
			load_reference(self.config, 5, self.out)


class ReferenceCheckTests(ServiceTestCase):
	def setUp(self):
		super().setUp()
		self.reference = compute_reference(self.config, 5, self.out, checkpoints=False)

	def test_shift_against_target(self):
		check = check_reference(self.config, 5, self.out, target_mse=1e6)
		self.assertTrue(check.passed)
		self.assertEqual(check.factor, REFERENCE_CHECK_SCALE * self.config.reference_factor)
		self.assertGreater(check.shift, 0.0)
		meta = json.loads(check.path.read_text())
		self.assertEqual((meta["target_mse"], meta["tolerance"], meta["passed"]), (1e6, 1e5, True))
		self.assertEqual(ExperimentRun.objects.get(command="reference_check").status, RunStatus.DONE)

		failed = check_reference(self.config, 5, self.out, target_mse=1e-30)
		self.assertFalse(failed.passed)
		self.assertEqual(failed.shift, check.shift)
		self.assertEqual(ExperimentRun.objects.filter(command="reference_check", status=RunStatus.INVALID).count(), 1)

	def test_target_defaults_to_sweep(self):
		with self.assertRaises(ConfigurationError):
			check_reference(self.config, 5, self.out)
		result = run_mse_vs_cost(self.config, 5, self.out)
		smallest = min(p.mse for c in result.curves.values() for p in c.points if p.mse is not None)
		self.assertEqual(check_reference(self.config, 5, self.out).target_mse, smallest)

	def test_non_positive_target(self):
		with self.assertRaises(ConfigurationError):
			check_reference(self.config, 5, self.out, target_mse=0.0)


class ReplicationTests(ServiceTestCase):
	def test_default_regression_at_three_levels(self):
		config = ExperimentConfig()
		model = build_model(config, 1)
		panel = evaluation_panel(config, 1)
		mlsmc = run_replication("mlsmc", config, model, panel, 3, RngStream(1))
		self.assertTrue(np.all(np.isfinite(mlsmc.prediction)))
		self.assertEqual(mlsmc.prediction.shape, (config.n_test, 1))
		self.assertEqual(mlsmc.diagnostics["levels"], [1, 2, 3])
		self.assertGreater(min(mlsmc.diagnostics["ess"]), 1.0)
		for acceptance in mlsmc.diagnostics["acceptance"]:
			self.assertTrue(0.05 < acceptance < 0.95, acceptance)
		smc = run_replication("smc", config, model, panel, 3, RngStream(1))
		self.assertTrue(0.05 < smc.diagnostics["acceptance"] < 0.95, smc.diagnostics)

	def test_unknown_sampler(self):
		with self.assertRaises(ConfigurationError):
			run_replication("mcmc", self.config, build_model(self.config, 5), evaluation_panel(self.config, 5), 2,
				RngStream(1))


class BenchTests(ServiceTestCase):
	def setUp(self):
		super().setUp()
		compute_reference(self.config, 5, self.out, checkpoints=False)

	def test_sweep_ledger_and_artifacts(self):
		result = run_mse_vs_cost(self.config, 5, self.out)
		self.assertEqual(result.run.status, RunStatus.DONE)
		self.assertEqual(result.run.replications.count(), 8)
		self.assertEqual(set(result.curves), {"smc", "mlsmc"})
		for curve in result.curves.values():
			self.assertEqual([p.L for p in curve.points], [2, 3])
		stem = artifact_stem(self.config, 5)
		for name in (f"bench_{stem}.csv", f"curve_{stem}.csv", f"bench_{stem}.svg", f"bench_{stem}.json"):
			self.assertTrue((self.out / name).exists(), name)
		meta = json.loads((self.out / f"bench_{stem}.json").read_text())
		self.assertEqual(meta["samplers"], ["smc", "mlsmc"])
		self.assertIsNotNone(meta["reference"])
		self.assertEqual(meta["pcn_adapt"], self.config.pcn_adapt)

		records = [json.loads(line) for line in result.paths["jsonl"].read_text().splitlines()]
		self.assertEqual(len(records), 8)
		for record in records:
			self.assertEqual(record["config"], self.config.to_dict())
			self.assertEqual(record["seed"], 5)
			self.assertTrue(record["levels"])
			if record["status"] == ReplicationStatus.OK:
				self.assertEqual(np.shape(record["estimate"]), (4, 2))
		mlsmc = [r for r in records if r["sampler"] == "mlsmc" and r["status"] == ReplicationStatus.OK]
		self.assertTrue(mlsmc)
		for record in mlsmc:
			self.assertEqual([lv["level"] for lv in record["levels"]], list(range(1, record["L"] + 1)))
			self.assertIsNone(record["levels"][0]["increment_variance"])
			self.assertTrue(all(lv["increment_variance"] >= 0 for lv in record["levels"][1:]))

		before = {p: Path(p).read_bytes() for p in result.paths.values()}
		emit_bench_outputs(result.run, self.config, 5, self.out)
		self.assertEqual(before, {p: Path(p).read_bytes() for p in result.paths.values()})

	def test_resume_skips_finished_cells(self):
		result = run_mse_vs_cost(self.config, 5, self.out)
		ids = set(result.run.replications.values_list("id", flat=True))
		again = run_mse_vs_cost(self.config, 5, self.out, run=result.run)
		self.assertEqual(set(again.run.replications.values_list("id", flat=True)), ids)

	def test_thread_count_does_not_change_results(self):
		serial = run_mse_vs_cost(self.config, 5, self.out / "serial", threads=1)
		pooled = run_mse_vs_cost(self.config, 5, self.out / "pooled", threads=3)
		self.assertEqual(serial.paths["bench_csv"].read_bytes(), pooled.paths["bench_csv"].read_bytes())

	def test_record_replication_is_idempotent(self):
		run = ExperimentRun.objects.create(command="bench", task="classification", alpha=2.0, seed=5)
		a = record_replication(run, "smc", 3, 0, cost=1.0, sq_error=0.5)
		b = record_replication(run, "smc", 3, 0, cost=9.0, sq_error=9.0)
		self.assertEqual(a.pk, b.pk)
		self.assertEqual(ReplicationResult.objects.get(pk=a.pk).cost, 1.0)
		failed = record_replication(run, "mlsmc", 3, 0, error="degeneracy at population 2")
		self.assertEqual(failed.status, ReplicationStatus.FAILED)


class CommandTests(ServiceTestCase):
	def write_config(self, data) -> str:
		path = self.out / "config.json"
		path.write_text(json.dumps(data))
		return str(path)

	def test_bad_config_exits_with_code_two(self):
		path = self.write_config({"task": "regression", "mystery": 1})
		for command in ("bench", "reference", "rate_check", "plot"):
			with self.subTest(command=command):
				with self.assertRaises(CommandError) as ctx:
					call_command(command, config=path, out=str(self.out), stdout=StringIO())
				self.assertEqual(ctx.exception.returncode, EXIT_CONFIG)

	def test_bench_without_reference_exits_with_code_two(self):
		path = self.write_config({k: list(v) if isinstance(v, tuple) else v for k, v in TINY.items()})
		with self.assertRaises(CommandError) as ctx:
			call_command("bench", config=path, out=str(self.out), stdout=StringIO())
		self.assertEqual(ctx.exception.returncode, EXIT_CONFIG)

	def test_reference_bench_and_plot(self):
		path = self.write_config({k: list(v) if isinstance(v, tuple) else v for k, v in TINY.items()})
		stdout = StringIO()
		call_command("reference", config=path, out=str(self.out), no_checkpoints=True, stdout=stdout)
		call_command("bench", config=path, out=str(self.out), threads=2, stdout=stdout)
		svg = self.out / f"bench_{artifact_stem(self.config, 5)}.svg"
		svg.unlink()
		call_command("plot", config=path, out=str(self.out), stdout=stdout)
		self.assertTrue(svg.exists())
		self.assertIn("mlsmc:", stdout.getvalue())

	def test_rate_check(self):
		path = self.write_config({"rate_samples": 1000, "rate_levels": [1, 3]})
		stdout = StringIO()
		call_command("rate_check", config=path, out=str(self.out), seed=3, stdout=stdout)
		rows = (self.out / "rate_seed3.csv").read_text().strip().splitlines()
		self.assertEqual(len(rows), 1 + 4 * 3)
		meta = json.loads((self.out / "rate_seed3.json").read_text())
		self.assertEqual(len(meta["slopes"]), 4)
		self.assertTrue((self.out / "rate_seed3.svg").exists())
		self.assertEqual(ExperimentRun.objects.get(command="rate_check").status, RunStatus.DONE)

	def test_reference_check_gate(self):
		path = self.write_config({k: list(v) if isinstance(v, tuple) else v for k, v in TINY.items()})
		stdout = StringIO()
		call_command("reference", config=path, out=str(self.out), no_checkpoints=True, stdout=stdout)
		call_command("reference", config=path, out=str(self.out), check=True, target_mse=1e6, stdout=stdout)
		self.assertIn("passed=True", stdout.getvalue())
		with self.assertRaises(CommandError) as ctx:
			call_command("reference", config=path, out=str(self.out), check=True, target_mse=1e-30, stdout=stdout)
		self.assertEqual(ctx.exception.returncode, EXIT_GATE)
		with self.assertRaises(CommandError) as ctx:
			call_command("reference", config=path, out=str(self.out), check=True, stdout=stdout)
		self.assertEqual(ctx.exception.returncode, EXIT_CONFIG)

	def test_rate_check_failure_is_recorded(self):
		config = ExperimentConfig(rate_samples=1000, rate_levels=(1, 3))
		with mock.patch("bench.services.increment_second_moment", side_effect=RuntimeError("out of memory")):
			with self.assertRaises(RuntimeError):
				run_rate_check(config, 3, self.out)
		run = ExperimentRun.objects.get(command="rate_check")
		self.assertEqual(run.status, RunStatus.FAILED)
		self.assertEqual(run.last_error, "out of memory")
		self.assertFalse((self.out / "rate_seed3.csv").exists())

	def test_rate_check_sweeps_full_scale_alphas(self):
		config = ExperimentConfig(full_scale=True, rate_samples=1000, rate_levels=(1, 3))
		result = run_rate_check(config, 3, self.out, threads=2)
		meta = json.loads((self.out / "rate_seed3.json").read_text())
		self.assertEqual(meta["alphas"], [1.7, 1.9, 2.0, 3.0, 1.1, 1.4])
		self.assertEqual(len(result["slopes"]), 6 * 4)
