import tempfile
import xml.etree.ElementTree as ET
from dataclasses import replace
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_array_equal

from bench.adapters.artifact_adapter import BENCH_COLUMNS, ArtifactAdapter
from bench.adapters.checkpoint_adapter import CheckpointAdapter
from bench.analysis import build_curve
from core.exceptions import DomainError
from core.nn import NetworkShape
from core.smc import ParticlePopulation, TemperedPath


def population(with_extras=True) -> ParticlePopulation:
	shape = NetworkShape(3, 2, 1, 2)
	gen = np.random.default_rng(0)
	return ParticlePopulation(
		level=2,
		shape=shape,
		particles=gen.normal(size=(6, shape.param_count)),
		log_weights=gen.normal(size=6),
		log_lik=gen.normal(size=6) if with_extras else None,
		ancestors=np.array([0, 0, 2, 3, 5, 5]) if with_extras else None,
		acceptance=0.25 if with_extras else None,
		cost=1234.0,
	)


class CheckpointAdapterTests(SimpleTestCase):
	def assert_same(self, a, b):
		self.assertEqual(a.shape, b.shape)
		self.assertEqual(a.level, b.level)
		assert_array_equal(a.particles, b.particles)
		assert_array_equal(a.log_weights, b.log_weights)
		self.assertEqual(a.cost, b.cost)
		self.assertEqual(a.acceptance, b.acceptance)
		for x, y in ((a.log_lik, b.log_lik), (a.ancestors, b.ancestors)):
			if x is None:
				self.assertIsNone(y)
			else:
				assert_array_equal(x, y)

	def test_encode_decode(self):
		for extras in (True, False):
			with self.subTest(extras=extras):
				pop = population(extras)
				self.assert_same(CheckpointAdapter.decode(CheckpointAdapter.encode(pop)), pop)

	def test_tempered_path_survives(self):
		gen = np.random.default_rng(1)
		evaluated = TemperedPath((0.0, 0.3, 1.0), (0.97, 0.95), gen.normal(size=(4, 2)), gen.normal(size=(4, 3)),
			gen.normal(size=(4, 3)))
		for path in (evaluated, TemperedPath((0.0, 1.0))):
			with self.subTest(evaluated=path.inputs is not None):
				pop = replace(population(), path=path)
				blob = CheckpointAdapter.encode(pop)
				out = CheckpointAdapter.decode(blob).path
				self.assert_same(CheckpointAdapter.decode(blob), pop)
				self.assertEqual((out.temperatures, out.rhos), (path.temperatures, path.rhos))
				for x, y in ((out.inputs, path.inputs), (out.increment, path.increment), (out.second, path.second)):
					if y is None:
						self.assertIsNone(x)
					else:
						assert_array_equal(x, y)
				with self.assertRaises(DomainError):
					CheckpointAdapter.decode(blob[:-8])

	def test_rejects_corrupt_blobs(self):
		blob = CheckpointAdapter.encode(population())
		with self.assertRaises(DomainError):
			CheckpointAdapter.decode(b"XXXX" + blob[4:])
		with self.assertRaises(DomainError):
			CheckpointAdapter.decode(blob[:-8])
		with self.assertRaises(DomainError):
			CheckpointAdapter.decode(blob[:10])

	def test_load_all_stops_at_first_gap(self):
		with tempfile.TemporaryDirectory() as tmp:
			for index in (0, 1, 3):
				CheckpointAdapter.save(population(), tmp, index)
			loaded = CheckpointAdapter.load_all(tmp)
			self.assertEqual(len(loaded), 2)
			self.assertFalse(any(Path(tmp).glob("*.tmp")))
			self.assertEqual(CheckpointAdapter.load_all(Path(tmp) / "empty"), [])


class ArtifactAdapterTests(SimpleTestCase):
	def setUp(self):
		self.tmp = tempfile.TemporaryDirectory()
		self.dir = Path(self.tmp.name)
		records = [(L, 4.0 ** L * (1 + 0.1 * r), 4.0 ** -L * (1 + 0.2 * r)) for L in (3, 4, 5) for r in range(4)]
		self.curves = [build_curve("smc", records), build_curve("mlsmc", [(L, c / 2, s) for L, c, s in records])]

	def tearDown(self):
		self.tmp.cleanup()

	def test_bench_csv(self):
		rows = [{"sampler": "smc", "L": 3, "alpha": 2.0, "replication": r, "cost": 10.0 * r, "sq_error": 0.5} for r in range(3)]
		path = ArtifactAdapter.write_bench_csv(self.dir / "out" / "bench.csv", rows)
		back = ArtifactAdapter.read_csv(path)
		self.assertEqual(len(back), 3)
		self.assertEqual(list(back[0]), BENCH_COLUMNS)
		self.assertEqual(float(back[2]["cost"]), 20.0)

	def test_array_round_trip_and_checksum(self):
		values = np.array([[0.1, -2.5], [1e-17, 3.0]])
		path = ArtifactAdapter.write_array(self.dir / "ref.csv", values)
		assert_array_equal(ArtifactAdapter.read_array(path), values)
		first = ArtifactAdapter.checksum(path)
		ArtifactAdapter.write_array(path, values)
		self.assertEqual(ArtifactAdapter.checksum(path), first)
		self.assertEqual(len(first), 64)

	def test_json_is_sorted(self):
		path = ArtifactAdapter.write_json(self.dir / "meta.json", {"b": 1, "a": [1, 2]})
		self.assertTrue(path.read_text().startswith('{\n  "a"'))
		self.assertEqual(ArtifactAdapter.read_json(path), {"a": [1, 2], "b": 1})

	def test_curve_plot_is_byte_identical_and_valid_svg(self):
		a = ArtifactAdapter.plot_curves(self.dir / "a.svg", self.curves, title="regression")
		b = ArtifactAdapter.plot_curves(self.dir / "b.svg", self.curves, title="regression")
		self.assertEqual(a.read_bytes(), b.read_bytes())
		root = ET.parse(a).getroot()
		self.assertTrue(root.tag.endswith("svg"))
		self.assertIn("MLSMC", a.read_text())

	def test_rate_plot(self):
		rows = [{"alpha": 2.0, "depth": d, "activation": "tanh", "level": l, "estimate": 2.0 ** (-3 * l), "std_error": 0.0}
			for d in (2, 3) for l in range(3, 7)]
		path = ArtifactAdapter.plot_rates(self.dir / "rate.svg", rows)
		ET.parse(path)
		csv_path = ArtifactAdapter.write_rate_csv(self.dir / "rate.csv", rows)
		self.assertEqual(len(ArtifactAdapter.read_csv(csv_path)), 8)

	def test_curve_csv_rows(self):
		path = ArtifactAdapter.write_curve_csv(self.dir / "curve.csv", self.curves)
		rows = ArtifactAdapter.read_csv(path)
		self.assertEqual(len(rows), 6)
		self.assertEqual({r["sampler"] for r in rows}, {"smc", "mlsmc"})
