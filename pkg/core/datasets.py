"""Synthetic datasets for the regression, spiral-classification and inverse-RL experiments.


- RegressionData: inputs x ~ N(2, 0.5) (0.5 read as variance), outputs from a prior-drawn
  teacher network plus N(0, 0.01^2) noise
- ClassificationData: two interleaved spiral arms, labels 0/1
- RlTrajectory: i.i.d. states in R^17, 8 actions chosen by a noisy argmax of a teacher value
  network over deterministic affine successor states

Every generator is a pure function of its seed; the teacher parameters and the transition
coefficients are kept on the returned object. Datasets round-trip through a column-oriented CSV.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import constants
from .exceptions import DomainError, ShapeError
from .nn import Activation, NetworkShape, ThetaLevel, forward_batch
from .prior import TnnPrior, sample
from .rng import RngStream

REGRESSION_INPUT_MEAN = 2.0
REGRESSION_INPUT_VARIANCE = 0.5


def _finite(name: str, arr: np.ndarray):
	if not np.all(np.isfinite(arr)):
		raise DomainError(f"{name} must be finite")


@dataclass(frozen=True, eq=False)
class RegressionData:
	inputs: np.ndarray
	outputs: np.ndarray
	noise_var: np.ndarray
	teacher: ThetaLevel | None = None
	metadata: dict = field(default_factory=dict)

	def __post_init__(self):
		X = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
		Y = np.asarray(self.outputs, dtype=np.float64).reshape(X.shape[0], -1)
		var = np.broadcast_to(np.asarray(self.noise_var, dtype=np.float64), (Y.shape[1],)).copy()
		if X.shape[0] < 1:
			raise ShapeError("regression data needs at least one point")
		_finite("inputs", X)
		_finite("outputs", Y)
		if not np.all(var > 0):
			raise DomainError("noise variances must be positive")
		object.__setattr__(self, "inputs", X)
		object.__setattr__(self, "outputs", Y)
		object.__setattr__(self, "noise_var", var)

	@property
	def size(self) -> int:
		return self.inputs.shape[0]

	@property
	def input_dim(self) -> int:
		return self.inputs.shape[1]

	@property
	def output_dim(self) -> int:
		return self.outputs.shape[1]


@dataclass(frozen=True, eq=False)
class ClassificationData:
	inputs: np.ndarray
	labels: np.ndarray
	n_classes: int = 2
	metadata: dict = field(default_factory=dict)

	def __post_init__(self):
		X = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
		y = np.asarray(self.labels).reshape(-1)
		if y.size != X.shape[0] or X.shape[0] < 1:
			raise ShapeError("one label per input is required")
		if not np.issubdtype(y.dtype, np.integer) or y.min() < 0 or y.max() >= self.n_classes:
			raise DomainError(f"labels must be integers in [0, {self.n_classes})")
		_finite("inputs", X)
		object.__setattr__(self, "inputs", X)
		object.__setattr__(self, "labels", y.astype(np.int64))

	@property
	def size(self) -> int:
		return self.inputs.shape[0]

	@property
	def one_hot(self) -> np.ndarray:
		return np.eye(self.n_classes)[self.labels]

	@property
	def input_dim(self) -> int:
		return self.inputs.shape[1]


@dataclass(frozen=True, eq=False)
class AffineTransition:
	"""
	Deterministic successor map T(x, a) = W_a x + c_a
	"""
	weights: np.ndarray
	offsets: np.ndarray

	@property
	def n_actions(self) -> int:
		return self.weights.shape[0]

	@property
	def state_dim(self) -> int:
		return self.weights.shape[1]

	def __call__(self, x: np.ndarray, a: int) -> np.ndarray:
		return self.weights[a] @ x + self.offsets[a]

	def successors(self, states: np.ndarray) -> np.ndarray:
		"""
		(T, s) states -> (T, M, s) successor states, one per action
		"""
		return np.einsum("mij,tj->tmi", self.weights, states) + self.offsets[None, :, :]


@dataclass(frozen=True, eq=False)
class RlTrajectory:
	states: np.ndarray
	actions: np.ndarray
	sigma: float
	transition: AffineTransition
	teacher: ThetaLevel | None = None
	metadata: dict = field(default_factory=dict)

	def __post_init__(self):
		X = np.atleast_2d(np.asarray(self.states, dtype=np.float64))
		a = np.asarray(self.actions).reshape(-1).astype(np.int64)
		if a.size != X.shape[0] or X.shape[0] < 1:
			raise ShapeError("one action per state is required")
		if X.shape[1] != self.transition.state_dim:
			raise ShapeError("state dimension does not match the transition map")
		if a.min() < 0 or a.max() >= self.transition.n_actions:
			raise DomainError(f"actions must lie in [0, {self.transition.n_actions})")
		if not self.sigma > 0:
			raise DomainError("sigma must be positive")
		_finite("states", X)
		object.__setattr__(self, "states", X)
		object.__setattr__(self, "actions", a)

	@property
	def size(self) -> int:
		return self.states.shape[0]

	@property
	def n_actions(self) -> int:
		return self.transition.n_actions

	@property
	def input_dim(self) -> int:
		return self.states.shape[1]


def _teacher(seed_stream: RngStream, depth, input_dim, output_dim, level, alpha, act) -> ThetaLevel:
	prior = TnnPrior(alpha, NetworkShape(depth, input_dim, output_dim, level), act)
	return sample(prior, seed_stream.child("teacher"))


def regression_inputs(gen: np.random.Generator, count: int, n: int) -> np.ndarray:
	return REGRESSION_INPUT_MEAN + np.sqrt(REGRESSION_INPUT_VARIANCE) * gen.standard_normal((count, n))


def gen_regression(seed: int, N: int = 200, n: int = 10, teacher_level: int = constants.REFERENCE_LEVEL,
		alpha: float = 2.0, act: Activation = Activation.TANH, depth: int = 3,
		teacher: ThetaLevel | None = None, noise_std: float = constants.REGRESSION_NOISE_STD) -> RegressionData:
	stream = RngStream(seed).child("regression")
	gen = stream.generator()
	if teacher is None:
		teacher = _teacher(stream, depth, n, 1, teacher_level, alpha, act)
	X = regression_inputs(gen, N, n)
	f = forward_batch(teacher.shape, teacher.values, act, X)[0]
	Y = f + noise_std * gen.standard_normal(f.shape)
	return RegressionData(X, Y, np.full(f.shape[1], noise_std ** 2), teacher, {
		"task": "regression",
		"seed": int(seed),
		"input_mean": REGRESSION_INPUT_MEAN,
		"input_variance": REGRESSION_INPUT_VARIANCE,
		"noise_std": noise_std,
		"teacher_level": teacher.level,
		"alpha": alpha,
		"activation": act.value,
	})


def spiral_points(gen: np.random.Generator, N: int, a: float, p: float, noise_std: float):
	"""
	N noisy points per arm; arm k is rotated by k*pi
	"""
	points, labels = [], []
	for k in (0, 1):
		u = gen.uniform(size=N)
		t = gen.uniform(size=N)
		radius = a * u ** p
		angle = 2.0 * np.pi * t ** p + k * np.pi
		clean = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
		points.append(clean + noise_std * gen.standard_normal(clean.shape))
		labels.append(np.full(N, k))
	return np.concatenate(points), np.concatenate(labels)


def gen_spiral(seed: int, N: int = 500, a: float = 16.0, p: float = 0.05,
		noise_std: float = constants.SPIRAL_NOISE_STD) -> ClassificationData:
	X, y = spiral_points(RngStream(seed).child("spiral").generator(), N, a, p, noise_std)
	return ClassificationData(X, y, 2, {
		"task": "classification", "seed": int(seed), "a": a, "p": p, "noise_std": noise_std,
	})


def make_transition(gen: np.random.Generator, n_actions: int, state_dim: int) -> AffineTransition:
	W = np.eye(state_dim)[None] + 0.1 * gen.standard_normal((n_actions, state_dim, state_dim)) / np.sqrt(state_dim)
	c = 0.5 * gen.standard_normal((n_actions, state_dim))
	return AffineTransition(W, c)


def noisy_argmax_actions(values: np.ndarray, sigma: float, gen: np.random.Generator) -> np.ndarray:
	"""
	argmax_a [v_a + sigma * eps_a] per row of (T, M) values
	"""
	return np.argmax(values + sigma * gen.standard_normal(values.shape), axis=1)


def gen_rl(seed: int, T: int = 100, M: int = 8, state_dim: int = 17, sigma: float = constants.RL_SIGMA,
		teacher_level: int = constants.REFERENCE_LEVEL, alpha: float = 2.0, act: Activation = Activation.TANH,
		depth: int = 3, teacher: ThetaLevel | None = None) -> RlTrajectory:
	stream = RngStream(seed).child("rl")
	gen = stream.generator()
	transition = make_transition(gen, M, state_dim)
	if teacher is None:
		teacher = _teacher(stream, depth, state_dim, 1, teacher_level, alpha, act)
	states = gen.standard_normal((T, state_dim))
	succ = transition.successors(states).reshape(T * M, state_dim)
	values = forward_batch(teacher.shape, teacher.values, act, succ)[0, :, 0].reshape(T, M)
	actions = noisy_argmax_actions(values, sigma, gen)
	return RlTrajectory(states, actions, sigma, transition, teacher, {
		"task": "rl", "seed": int(seed), "sigma": sigma, "teacher_level": teacher.level,
		"alpha": alpha, "activation": act.value,
	})


# --- CSV ---------------------------------------------------------------------

def _fmt(v) -> str:
	return repr(float(v))


def _write_rows(path: Path, header: list[str], rows):
	path = Path(path)
	try:
		with path.open("w", newline="") as fh:
			w = csv.writer(fh, lineterminator="\n")
			w.writerow(header)
			w.writerows(rows)
	except OSError as e:
		raise OSError(f"cannot write dataset {path}: {e}") from e


def _read_rows(path: Path):
	path = Path(path)
	try:
		with path.open(newline="") as fh:
			r = csv.reader(fh)
			header = next(r)
			return header, [row for row in r]
	except OSError as e:
		raise OSError(f"cannot read dataset {path}: {e}") from e


def save_csv(data, path):
	"""
	Columns: regression x*,y*,var*; classification x*,label,n_classes; rl x*,action,sigma.
	RL transitions go to a sibling <stem>.transition.csv (action,row,w*,offset).
	"""
	path = Path(path)
	if isinstance(data, RegressionData):
		n, m = data.input_dim, data.output_dim
		header = [f"x{i}" for i in range(n)] + [f"y{k}" for k in range(m)] + [f"var{k}" for k in range(m)]
		rows = ([_fmt(v) for v in x] + [_fmt(v) for v in y] + [_fmt(v) for v in data.noise_var]
			for x, y in zip(data.inputs, data.outputs))
		_write_rows(path, header, rows)
	elif isinstance(data, ClassificationData):
		header = [f"x{i}" for i in range(data.input_dim)] + ["label", "n_classes"]
		rows = ([_fmt(v) for v in x] + [str(int(k)), str(data.n_classes)] for x, k in zip(data.inputs, data.labels))
		_write_rows(path, header, rows)
	elif isinstance(data, RlTrajectory):
		s = data.input_dim
		header = [f"x{i}" for i in range(s)] + ["action", "sigma"]
		rows = ([_fmt(v) for v in x] + [str(int(a)), _fmt(data.sigma)] for x, a in zip(data.states, data.actions))
		_write_rows(path, header, rows)
		tr = data.transition
		t_rows = ([str(a), str(i)] + [_fmt(v) for v in tr.weights[a, i]] + [_fmt(tr.offsets[a, i])]
			for a in range(tr.n_actions) for i in range(s))
		_write_rows(transition_path(path), ["action", "row"] + [f"w{j}" for j in range(s)] + ["offset"], t_rows)
	else:
		raise TypeError(f"cannot serialise {type(data).__name__}")


def transition_path(path) -> Path:
	path = Path(path)
	return path.with_name(path.stem + ".transition.csv")


def load_csv(path):
	"""
	Inverse of save_csv; the dataset kind is recognised from the header
	"""
	header, rows = _read_rows(path)
	table = np.array(rows, dtype=object)
	xs = [i for i, h in enumerate(header) if h.startswith("x")]
	X = table[:, xs].astype(np.float64)
	if "label" in header:
		labels = table[:, header.index("label")].astype(np.int64)
		return ClassificationData(X, labels, int(table[0, header.index("n_classes")]))
	if "action" in header:
		actions = table[:, header.index("action")].astype(np.int64)
		sigma = float(table[0, header.index("sigma")])
		_, t_rows = _read_rows(transition_path(path))
		t = np.array(t_rows, dtype=np.float64)
		M, s = int(t[:, 0].max()) + 1, X.shape[1]
		W = t[:, 2:2 + s].reshape(M, s, s)
		c = t[:, 2 + s].reshape(M, s)
		return RlTrajectory(X, actions, sigma, AffineTransition(W, c))
	ys = [i for i, h in enumerate(header) if h.startswith("y")]
	vs = [i for i, h in enumerate(header) if h.startswith("var")]
	return RegressionData(X, table[:, ys].astype(np.float64), table[0, vs].astype(np.float64))
