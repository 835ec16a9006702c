from bench.management.base import BenchCommand
from bench.services import run_rate_check


class Command(BenchCommand):
	help = "Fit the decay rate of E|f_l - f_(l-1)|^2 under the coupled prior (D in {2, 3}, ReLU and Tanh)"
	task_override = "rate"

	def run(self, config, seed, out, threads):
		result = run_rate_check(config, seed, out, threads)
		for s in result["slopes"]:
			self.stdout.write(f"alpha={s['alpha']:g} D={s['depth']} {s['activation']}: "
				f"slope {s['slope']:.3f} +- {s['std_error']:.3f} (canonical {s['canonical']:.1f})")
		self.stdout.write(self.style.SUCCESS(f"wrote {result['paths']['csv']}"))
