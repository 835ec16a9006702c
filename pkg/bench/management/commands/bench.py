from django.core.management.base import CommandError

from bench.management.base import EXIT_DEGENERATE, BenchCommand
from bench.models import ExperimentRun
from bench.services import run_mse_vs_cost
from core.exceptions import ConfigurationError


class Command(BenchCommand):
	help = "Replicated SMC / MLSMC runs per level: cost-vs-MSE curves, CSV, SVG and JSON"

	def add_arguments(self, parser):
		super().add_arguments(parser)
		parser.add_argument("--resume", type=int, default=None, help="id of an interrupted bench run to continue")

	def handle(self, *args, **options):
		self.resume_id = options["resume"]
		return super().handle(*args, **options)

	def run(self, config, seed, out, threads):
		run = None
		if self.resume_id is not None:
			if len(config.alpha_grid) > 1:
				raise ConfigurationError("--resume continues a single-alpha sweep; set alpha explicitly")
			run = ExperimentRun.objects.filter(pk=self.resume_id, command="bench").first()
			if run is None:
				raise ConfigurationError(f"no bench run with id {self.resume_id}")
		invalid = False
		for alpha in config.alpha_grid:
			result = run_mse_vs_cost(config.with_overrides(alpha=alpha), seed, out, threads, run=run)
			for sampler, curve in result.curves.items():
				xi = "n/a" if curve.xi is None else f"{curve.xi:.3f}"
				self.stdout.write(f"{sampler}: {len(curve.points)} points, xi={xi}, valid={curve.valid}")
			invalid = invalid or not result.valid
			self.stdout.write(self.style.SUCCESS(f"wrote {result.paths['bench_csv']}"))
		if invalid:
			raise CommandError("more than 20% of replications failed on some curve", returncode=EXIT_DEGENERATE)
