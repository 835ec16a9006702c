import json
import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from bench.config import FULL_SCALE_LEVELS, FULL_SCALE_REPLICATIONS, ExperimentConfig, load_config
from core.exceptions import ConfigurationError
from core.nn import Activation


class ExperimentConfigTests(SimpleTestCase):
	def test_defaults(self):
		config = ExperimentConfig()
		self.assertEqual(config.levels, (3, 6))
		self.assertEqual(config.sampler_list, ("smc", "mlsmc"))
		self.assertEqual(config.act, Activation.TANH)
		self.assertEqual(config.allocation_beta, 3.0)
		self.assertEqual(list(config.level_range), [3, 4, 5, 6])
		self.assertEqual(config.budget(5), config.budget_base * config.budget_growth ** 2)

	def test_full_scale_grid(self):
		config = ExperimentConfig(full_scale=True)
		self.assertEqual(config.levels, FULL_SCALE_LEVELS)
		self.assertEqual(config.replications, FULL_SCALE_REPLICATIONS)
		explicit = ExperimentConfig(full_scale=True, replications=7)
		self.assertEqual(explicit.replications, 7)
		self.assertEqual(config.alpha_grid, (1.7, 1.9, 2.0, 3.0, 1.1, 1.4))
		self.assertEqual(ExperimentConfig(full_scale=True, alpha=3.0).alpha_grid, (3.0,))
		self.assertEqual(ExperimentConfig().alpha_grid, (2.0,))

	def test_invalid_values(self):
		bad = [
			{"task": "vision"},
			{"samplers": "mcmc"},
			{"activation": "sigmoid"},
			{"levels": (1, 4)},
			{"levels": (5, 4)},
			{"alpha": 0.5},
			{"replications": 0},
			{"pcn_rho": 1.0},
			{"n_steps": 0},
			{"rate_samples": 10},
			{"reference_level": 5},
			{"resampling": "residual"},
			{"bridge_ess": 1.0},
			{"bridge_ess": 0.0},
		]
		for kwargs in bad:
			with self.subTest(**{k: str(v) for k, v in kwargs.items()}):
				with self.assertRaises(ConfigurationError):
					ExperimentConfig(**kwargs)

	def test_mutation_and_bridging(self):
		config = ExperimentConfig(pcn_adapt=False, bridge_ess=None)
		self.assertFalse(config.mutation.adapt)
		self.assertIsNone(config.to_dict()["bridge_ess"])
		self.assertTrue(ExperimentConfig(pcn_adapt=True).mutation.adapt)

	def test_rate_task_ignores_reference(self):
		config = ExperimentConfig(task="rate", reference_level=3)
		self.assertEqual(config.task, "rate")

	def test_dict_round_trip(self):
		config = ExperimentConfig(task="rl", alpha=1.7, rate_alphas=(1.1, 3.0))
		data = json.loads(json.dumps(config.to_dict()))
		self.assertEqual(ExperimentConfig.from_dict(data), config)

	def test_unknown_fields(self):
		with self.assertRaises(ConfigurationError) as ctx:
			ExperimentConfig.from_dict({"task": "regression", "particles": 10})
		self.assertIn("particles", str(ctx.exception))

	def test_overrides_skip_none(self):
		config = ExperimentConfig().with_overrides(task="rate", alpha=None)
		self.assertEqual((config.task, config.alpha), ("rate", 2.0))


class LoadConfigTests(SimpleTestCase):
	def setUp(self):
		self.tmp = tempfile.TemporaryDirectory()
		self.dir = Path(self.tmp.name)

	def tearDown(self):
		self.tmp.cleanup()

	def test_none_gives_defaults(self):
		self.assertEqual(load_config(None), ExperimentConfig())

	def test_reads_json(self):
		path = self.dir / "c.json"
		path.write_text(json.dumps({"task": "classification", "levels": [3, 4]}))
		config = load_config(path)
		self.assertEqual((config.task, config.levels), ("classification", (3, 4)))

	def test_bad_files(self):
		(self.dir / "broken.json").write_text("{task:")
		(self.dir / "list.json").write_text("[1, 2]")
		for name in ("broken.json", "list.json", "missing.json"):
			with self.subTest(name=name):
				with self.assertRaises(ConfigurationError):
					load_config(self.dir / name)
