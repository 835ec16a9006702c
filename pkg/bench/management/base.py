"""Shared argument handling for the benchmark commands.

Every command takes --config, --seed, --out and --threads; MLBN_THREADS (settings) overrides --threads.
Configuration errors exit with status 2, degeneracy-dominated runs with status 3, a failed
reference self-consistency gate with status 4.
"""

from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from bench.config import ExperimentConfig, load_config
from core.exceptions import ConfigurationError, DegeneracyError

EXIT_CONFIG = 2
EXIT_DEGENERATE = 3
EXIT_GATE = 4


class BenchCommand(BaseCommand):
	task_override: str | None = None

	def add_arguments(self, parser):
		parser.add_argument("--config", default=None, help="flat JSON experiment config")
		parser.add_argument("--seed", type=int, default=None, help="master seed (u64); defaults to the config seed")
		parser.add_argument("--out", default=None, help="output directory (default MLBN_OUTPUT_DIR)")
		parser.add_argument("--threads", type=int, default=1, help="worker threads (MLBN_THREADS overrides)")

	def resolve(self, options) -> tuple[ExperimentConfig, int, Path, int]:
		config = load_config(options["config"])
		if self.task_override:
			config = config.with_overrides(task=self.task_override)
		if getattr(settings, "MLBN_FULL_SCALE", False) and not config.full_scale:
			config = config.with_overrides(full_scale=True)
		seed = options["seed"] if options["seed"] is not None else config.seed
		if not 0 <= seed < 2 ** 64:
			raise ConfigurationError("seed must be an unsigned 64-bit integer")
		out = Path(options["out"] or settings.MLBN_OUTPUT_DIR)
		threads = getattr(settings, "MLBN_THREADS", None) or options["threads"]
		return config, seed, out, max(1, int(threads))

	def handle(self, *args, **options):
		try:
			config, seed, out, threads = self.resolve(options)
			return self.run(config, seed, out, threads)
		except ConfigurationError as e:
			raise CommandError(f"configuration error: {e}", returncode=EXIT_CONFIG) from e
		except DegeneracyError as e:
			raise CommandError(f"degenerate run at population {e.level}: {e}", returncode=EXIT_DEGENERATE) from e
		except OSError as e:
			raise CommandError(str(e)) from e

	def run(self, config: ExperimentConfig, seed: int, out: Path, threads: int):
		raise NotImplementedError
