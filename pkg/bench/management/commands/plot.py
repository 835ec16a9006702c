from bench.management.base import BenchCommand
from bench.services import replot


class Command(BenchCommand):
	help = "Re-render the SVG of a finished bench sweep from its CSV files"

	def run(self, config, seed, out, threads):
		for alpha in config.alpha_grid:
			path = replot(out, config.with_overrides(alpha=alpha), seed)
			self.stdout.write(self.style.SUCCESS(f"wrote {path}"))
