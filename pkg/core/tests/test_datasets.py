import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_array_equal

from core import constants
from core.datasets import (
	ClassificationData, RegressionData, RlTrajectory, gen_regression, gen_rl, gen_spiral, load_csv, save_csv,
	spiral_points, transition_path,
)
from core.nn import Activation, NetworkShape, ThetaLevel, forward_batch
from core.rng import RngStream


class RegressionDatasetTests(SimpleTestCase):
	@classmethod
	def setUpClass(cls):
		super().setUpClass()
		cls.data = gen_regression(3)

	def test_deterministic(self):
		again = gen_regression(3)
		assert_array_equal(self.data.inputs, again.inputs)
		assert_array_equal(self.data.outputs, again.outputs)
		self.assertFalse(np.array_equal(self.data.outputs, gen_regression(4).outputs))

	def test_sizes_and_metadata(self):
		self.assertEqual(self.data.inputs.shape, (200, 10))
		self.assertEqual(self.data.outputs.shape, (200, 1))
		self.assertEqual(self.data.teacher.level, constants.REFERENCE_LEVEL)
		self.assertEqual(self.data.metadata["task"], "regression")

	def test_input_moments(self):
		X = self.data.inputs
		self.assertLess(abs(X.mean() - 2.0), 4 * np.sqrt(0.5 / X.size))
		self.assertLess(abs(X.var() - 0.5), 4 * 0.5 * np.sqrt(2.0 / X.size))

	def test_residuals_match_noise(self):
		t = self.data.teacher
		f = forward_batch(t.shape, t.values, Activation.TANH, self.data.inputs)[0]
		resid = (self.data.outputs - f).reshape(-1)
		self.assertLess(abs(resid.std() / constants.REGRESSION_NOISE_STD - 1.0), 0.2)


class SpiralDatasetTests(SimpleTestCase):
	def test_balanced_arms(self):
		data = gen_spiral(1, N=50)
		self.assertEqual(data.size, 100)
		self.assertEqual(int(data.labels.sum()), 50)
		assert_array_equal(data.one_hot.sum(axis=0), [50.0, 50.0])
		assert_array_equal(np.argmax(data.one_hot, axis=1), data.labels)

	def test_noise_free_radius(self):
		X, y = spiral_points(RngStream(2).generator(), 200, 16.0, 0.05, 0.0)
		radius = np.hypot(X[:, 0], X[:, 1])
		self.assertTrue(np.all(radius <= 16.0 + 1e-12))
		self.assertTrue(np.all(radius > 0.0))

	def test_first_arm_formula(self):
		gen_a = np.random.default_rng(5)
		gen_b = np.random.default_rng(5)
		X, y = spiral_points(gen_a, 30, 16.0, 0.05, 0.0)
		u, t = gen_b.uniform(size=30), gen_b.uniform(size=30)
		r = 16.0 * u ** 0.05
		arm0 = np.column_stack([r * np.cos(2 * np.pi * t ** 0.05), r * np.sin(2 * np.pi * t ** 0.05)])
		np.testing.assert_allclose(X[y == 0], arm0, atol=1e-12)


class RlDatasetTests(SimpleTestCase):
	def test_shapes_and_ranges(self):
		traj = gen_rl(1, T=20, M=8, teacher_level=3)
		self.assertEqual(traj.states.shape, (20, 17))
		self.assertEqual(traj.n_actions, 8)
		self.assertTrue(np.all((traj.actions >= 0) & (traj.actions < 8)))

	def test_deterministic(self):
		a = gen_rl(1, T=10, teacher_level=2)
		b = gen_rl(1, T=10, teacher_level=2)
		assert_array_equal(a.actions, b.actions)
		assert_array_equal(a.transition.weights, b.transition.weights)

	def test_successors_match_map(self):
		traj = gen_rl(2, T=3, M=4, state_dim=5, teacher_level=2)
		succ = traj.transition.successors(traj.states)
		for t in range(3):
			for a in range(4):
				np.testing.assert_allclose(succ[t, a], traj.transition(traj.states[t], a), atol=1e-12)

	def test_vanishing_noise_gives_argmax(self):
		traj = gen_rl(4, T=40, M=8, state_dim=6, sigma=1e-12, teacher_level=3)
		succ = traj.transition.successors(traj.states).reshape(-1, 6)
		teacher = traj.teacher
		values = forward_batch(teacher.shape, teacher.values, Activation.TANH, succ)[0, :, 0].reshape(40, 8)
		assert_array_equal(traj.actions, np.argmax(values, axis=1))

	def test_equal_values_give_uniform_actions(self):
		n = 10_000
		flat = ThetaLevel(NetworkShape(3, 3, 1, 2), np.zeros(NetworkShape(3, 3, 1, 2).param_count))
		traj = gen_rl(5, T=n, M=8, state_dim=3, teacher=flat)
		freq = np.bincount(traj.actions, minlength=8) / n
		se = np.sqrt(0.125 * 0.875 / n)
		# one band per action
		self.assertTrue(np.all(np.abs(freq - 0.125) < 4 * se), freq)


class CsvRoundTripTests(SimpleTestCase):
	def setUp(self):
		self.tmp = tempfile.TemporaryDirectory()
		self.dir = Path(self.tmp.name)

	def tearDown(self):
		self.tmp.cleanup()

	def test_regression(self):
		data = gen_regression(1, N=12, n=3, teacher_level=2)
		save_csv(data, self.dir / "reg.csv")
		back = load_csv(self.dir / "reg.csv")
		self.assertIsInstance(back, RegressionData)
		assert_array_equal(back.inputs, data.inputs)
		assert_array_equal(back.outputs, data.outputs)
		assert_array_equal(back.noise_var, data.noise_var)

	def test_classification(self):
		data = gen_spiral(1, N=7)
		save_csv(data, self.dir / "spiral.csv")
		back = load_csv(self.dir / "spiral.csv")
		self.assertIsInstance(back, ClassificationData)
		assert_array_equal(back.inputs, data.inputs)
		assert_array_equal(back.labels, data.labels)

	def test_classification_keeps_unused_classes(self):
		# every label is 0, so the class count cannot be read off the labels
		data = ClassificationData(np.zeros((4, 2)), np.zeros(4, dtype=np.int64), n_classes=3)
		save_csv(data, self.dir / "one_class.csv")
		self.assertEqual(load_csv(self.dir / "one_class.csv").n_classes, 3)
		assert_array_equal(load_csv(self.dir / "one_class.csv").one_hot, np.tile([1.0, 0.0, 0.0], (4, 1)))

	def test_rl(self):
		data = gen_rl(1, T=5, M=3, state_dim=4, teacher_level=2)
		path = self.dir / "rl.csv"
		save_csv(data, path)
		self.assertTrue(transition_path(path).exists())
		back = load_csv(path)
		self.assertIsInstance(back, RlTrajectory)
		assert_array_equal(back.states, data.states)
		assert_array_equal(back.actions, data.actions)
		assert_array_equal(back.transition.weights, data.transition.weights)
		assert_array_equal(back.transition.offsets, data.transition.offsets)
		self.assertEqual(back.sigma, data.sigma)

	def test_unknown_type(self):
		with self.assertRaises(TypeError):
			save_csv({"x": 1}, self.dir / "bad.csv")
