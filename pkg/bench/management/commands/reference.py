from django.core.management.base import CommandError

from bench.management.base import EXIT_GATE, BenchCommand
from bench.services import check_reference, compute_reference


class Command(BenchCommand):
	help = "Compute the ground-truth predictive means at the reference level, or check them at twice the budget"

	def add_arguments(self, parser):
		super().add_arguments(parser)
		parser.add_argument("--no-checkpoints", action="store_true", help="do not write or resume population checkpoints")
		parser.add_argument("--check", action="store_true",
			help="rerun at 2x reference_factor and require a shift below the smallest target MSE / 10")
		parser.add_argument("--target-mse", type=float, default=None,
			help="target MSE of the gate (default: smallest MSE of the finished bench sweep)")

	def handle(self, *args, **options):
		self.checkpoints = not options["no_checkpoints"]
		self.check = options["check"]
		self.target_mse = options["target_mse"]
		return super().handle(*args, **options)

	def run(self, config, seed, out, threads):
		failed = []
		for alpha in config.alpha_grid:
			cfg = config.with_overrides(alpha=alpha)
			if not self.check:
				result = compute_reference(cfg, seed, out, checkpoints=self.checkpoints)
				self.stdout.write(self.style.SUCCESS(f"wrote {result.path} sha256={result.checksum}"))
				continue
			check = check_reference(cfg, seed, out, target_mse=self.target_mse)
			self.stdout.write(f"alpha={alpha:g}: shift {check.shift:.3g}, tolerance {check.tolerance:.3g}, "
				f"passed={check.passed}")
			if not check.passed:
				failed.append(alpha)
		if failed:
			raise CommandError(f"reference self-consistency gate failed for alpha {failed}", returncode=EXIT_GATE)
