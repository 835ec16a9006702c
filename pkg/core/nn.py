"""Network shapes, parameter containers and forward evaluation.


- NetworkShape: depth D, input/output dims and the resolution level l (hidden width 2^l)
- ThetaLevel: all weights A_d and biases b_d at one level, stored as one flat read-only vector
- Activation: ReLU or tanh, applied to hidden pre-activations only

Parameters are laid out layer by layer as A_1 (row-major), b_1, A_2, b_2, ... The coarse
parameters of level l-1 embed into level l as the leading principal block of every layer, so
a fine vector restricted to embed_index() is exactly its coarse counterpart.
"""

from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np
from scipy.special import softmax

from .exceptions import DomainError, ShapeError


class Activation(str, Enum):
	RELU = "relu"
	TANH = "tanh"

	def apply(self, z: np.ndarray) -> np.ndarray:
		if self is Activation.RELU:
			return np.maximum(z, 0.0)
		return np.tanh(z)


@dataclass(frozen=True)
class NetworkShape:
	depth: int
	input_dim: int
	output_dim: int
	level: int

	def __post_init__(self):
		if self.depth < 2:
			raise ShapeError(f"depth must be >= 2, got {self.depth}")
		if self.input_dim < 1 or self.output_dim < 1:
			raise ShapeError("input_dim and output_dim must be positive")
		if self.level < 0:
			raise ShapeError(f"level must be >= 0, got {self.level}")

	@property
	def hidden_width(self) -> int:
		return 2 ** self.level

	def at_level(self, level: int) -> "NetworkShape":
		return NetworkShape(self.depth, self.input_dim, self.output_dim, level)

	@cached_property
	def layer_dims(self) -> tuple[tuple[int, int], ...]:
		"""
		(rows n_d, cols n_{d-1}) for d = 1..D
		"""
		widths = [self.input_dim] + [self.hidden_width] * (self.depth - 1) + [self.output_dim]
		return tuple((widths[d], widths[d - 1]) for d in range(1, self.depth + 1))

	@cached_property
	def blocks(self) -> tuple[tuple[slice, tuple[int, int], slice], ...]:
		"""
		Per layer: (slice of A_d in the flat vector, (rows, cols), slice of b_d)
		"""
		out = []
		offset = 0
		for rows, cols in self.layer_dims:
			w = slice(offset, offset + rows * cols)
			offset += rows * cols
			b = slice(offset, offset + rows)
			offset += rows
			out.append((w, (rows, cols), b))
		return tuple(out)

	@property
	def param_count(self) -> int:
		return sum(rows * cols + rows for rows, cols in self.layer_dims)

	def compatible(self, other: "NetworkShape") -> bool:
		"""
		Same family (depth and io dims); levels may differ
		"""
		return (self.depth, self.input_dim, self.output_dim) == (other.depth, other.input_dim, other.output_dim)


def param_count(shape: NetworkShape) -> int:
	return shape.param_count


@dataclass(frozen=True, eq=False)
class ThetaLevel:
	"""
	Parameters of one network at one level; immutable after construction
	"""
	shape: NetworkShape
	values: np.ndarray

	def __post_init__(self):
		values = np.array(self.values, dtype=np.float64).reshape(-1)
		if values.size != self.shape.param_count:
			raise ShapeError(f"expected {self.shape.param_count} parameters, got {values.size}")
		if not np.all(np.isfinite(values)):
			raise DomainError("parameters must be finite")
		values.setflags(write=False)
		object.__setattr__(self, "values", values)

	@classmethod
	def zeros(cls, shape: NetworkShape) -> "ThetaLevel":
		return cls(shape, np.zeros(shape.param_count))

	@classmethod
	def from_layers(cls, shape: NetworkShape, weights, biases) -> "ThetaLevel":
		if len(weights) != shape.depth or len(biases) != shape.depth:
			raise ShapeError(f"expected {shape.depth} layers")
		parts = []
		for (rows, cols), A, b in zip(shape.layer_dims, weights, biases):
			A = np.asarray(A, dtype=np.float64)
			b = np.asarray(b, dtype=np.float64).reshape(-1)
			if A.shape != (rows, cols) or b.shape != (rows,):
				raise ShapeError(f"layer expects A {(rows, cols)} and b ({rows},), got {A.shape} and {b.shape}")
			parts += [A.reshape(-1), b]
		return cls(shape, np.concatenate(parts))

	@property
	def level(self) -> int:
		return self.shape.level

	@property
	def weights(self) -> tuple[np.ndarray, ...]:
		return tuple(self.values[w].reshape(dims) for w, dims, _ in self.shape.blocks)

	@property
	def biases(self) -> tuple[np.ndarray, ...]:
		return tuple(self.values[b] for _, _, b in self.shape.blocks)


def _check_inputs(shape: NetworkShape, inputs) -> np.ndarray:
	X = np.asarray(inputs, dtype=np.float64)
	if X.ndim == 1:
		X = X[None, :]
	if X.ndim != 2 or X.shape[1] != shape.input_dim:
		raise ShapeError(f"inputs must have {shape.input_dim} columns, got shape {X.shape}")
	if not np.all(np.isfinite(X)):
		raise DomainError("inputs must be finite")
	return X


def forward_batch(shape: NetworkShape, params: np.ndarray, act: Activation, inputs) -> np.ndarray:
	"""
	Evaluate P parameter vectors (P, d) at N inputs (N, n); returns (P, N, m).

	g_0 = A_1 x + b_1, g_d = A_d act(g_{d-1}) + b_d; the output layer stays affine.
	"""
	params = np.atleast_2d(np.asarray(params, dtype=np.float64))
	if params.shape[1] != shape.param_count:
		raise ShapeError(f"expected {shape.param_count} parameters per row, got {params.shape[1]}")
	X = _check_inputs(shape, inputs)
	P = params.shape[0]
	h = None
	for d, (w, (rows, cols), b) in enumerate(shape.blocks):
		A = params[:, w].reshape(P, rows, cols)
		if d == 0:
			h = np.matmul(X[None, :, :], A.transpose(0, 2, 1))
		else:
			h = np.matmul(act.apply(h), A.transpose(0, 2, 1))
		h = h + params[:, None, b]
	return h


def forward(theta: ThetaLevel, act: Activation, x) -> np.ndarray:
	x = np.asarray(x, dtype=np.float64)
	if x.ndim != 1:
		raise ShapeError("forward expects a single input vector")
	return forward_batch(theta.shape, theta.values, act, x)[0, 0]


def softmax_predict(theta: ThetaLevel, act: Activation, x) -> np.ndarray:
	"""
	Class probabilities exp(h_k) / sum_j exp(h_j); max-subtracted inside scipy's softmax
	"""
	return softmax(forward(theta, act, x))


def embed_index(coarse: NetworkShape, fine: NetworkShape) -> np.ndarray:
	"""
	Positions in the fine flat vector of every coarse entry, in coarse order.

	Row index i < n_{l-1} (all output rows in the last layer), column j < n_{l-1}
	(all input columns in the first layer).
	"""
	if not coarse.compatible(fine) or fine.level != coarse.level + 1:
		raise ShapeError(f"cannot embed level {coarse.level} into level {fine.level}")
	parts = []
	for (_, (rc, cc), _), (wf, (_, cf), bf) in zip(coarse.blocks, fine.blocks):
		rows = np.arange(rc)[:, None]
		cols = np.arange(cc)[None, :]
		parts.append((wf.start + rows * cf + cols).reshape(-1))
		parts.append(bf.start + np.arange(rc))
	return np.concatenate(parts)


def new_entry_mask(coarse: NetworkShape, fine: NetworkShape) -> np.ndarray:
	"""
	Boolean mask over the fine vector: True where the entry has no coarse counterpart
	"""
	mask = np.ones(fine.param_count, dtype=bool)
	mask[embed_index(coarse, fine)] = False
	return mask


def restrict(fine: ThetaLevel) -> ThetaLevel:
	"""
	The coarse block of a fine parameter set (level - 1)
	"""
	coarse_shape = fine.shape.at_level(fine.level - 1)
	return ThetaLevel(coarse_shape, fine.values[embed_index(coarse_shape, fine.shape)])


def embed_check(coarse: ThetaLevel, fine: ThetaLevel) -> bool:
	idx = embed_index(coarse.shape, fine.shape)
	return bool(np.array_equal(fine.values[idx], coarse.values))
