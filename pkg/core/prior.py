"""Trace-class neural network prior.

Every weight A_{ij,d} ~ N(0, (i j)^-alpha) and bias b_{i,d} ~ N(0, i^-alpha), independently,
with i, j counted from 1. Level l-1 and level l are coupled by sharing the leading block of every
layer; the new entries of level l are fresh prior draws, so the conditional density q_l of the
new block is the prior restricted to it and prior(l) = prior(l-1) * q_l exactly.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy.stats import norm

from .exceptions import DomainError, ShapeError
from .nn import Activation, NetworkShape, ThetaLevel, embed_index, forward_batch, new_entry_mask
from .rng import RngStream

logger = logging.getLogger(__name__)

# Rows of coupled draws generated per chunk by the rate harness.
_CHUNK = 10_000


@dataclass(frozen=True)
class TnnPrior:
	alpha: float
	shape: NetworkShape
	activation: Activation = Activation.TANH

	def __post_init__(self):
		if not self.alpha > 0.5:
			raise DomainError(f"alpha must exceed 1/2, got {self.alpha}")

	@property
	def trace_class(self) -> bool:
		return self.alpha > 1.0

	def at_level(self, level: int) -> "TnnPrior":
		return TnnPrior(self.alpha, self.shape.at_level(level), self.activation)

	@cached_property
	def variance(self) -> np.ndarray:
		"""
		Per-entry prior variance, in the flat parameter layout
		"""
		parts = []
		for _, (rows, cols), _ in self.shape.blocks:
			i = np.arange(1, rows + 1, dtype=np.float64)
			j = np.arange(1, cols + 1, dtype=np.float64)
			parts.append(np.outer(i, j).reshape(-1) ** -self.alpha)
			parts.append(i ** -self.alpha)
		return np.concatenate(parts)

	@cached_property
	def std(self) -> np.ndarray:
		return np.sqrt(self.variance)

	@cached_property
	def _new_mask(self) -> np.ndarray:
		return new_entry_mask(self.shape.at_level(self.shape.level - 1), self.shape)

	@cached_property
	def _embed(self) -> np.ndarray:
		return embed_index(self.shape.at_level(self.shape.level - 1), self.shape)


def sample_batch(prior: TnnPrior, count: int, gen: np.random.Generator) -> np.ndarray:
	return gen.standard_normal((count, prior.shape.param_count)) * prior.std


def sample(prior: TnnPrior, rng: RngStream) -> ThetaLevel:
	return ThetaLevel(prior.shape, sample_batch(prior, 1, rng.generator())[0])


def extend_batch(prior_fine: TnnPrior, coarse: np.ndarray, gen: np.random.Generator) -> np.ndarray:
	"""
	Append fresh prior draws for the new block of every coarse row (P, d_{l-1}) -> (P, d_l)
	"""
	coarse = np.atleast_2d(coarse)
	mask = prior_fine._new_mask
	fine = np.empty((coarse.shape[0], prior_fine.shape.param_count))
	fine[:, prior_fine._embed] = coarse
	fine[:, mask] = gen.standard_normal((coarse.shape[0], int(mask.sum()))) * prior_fine.std[mask]
	return fine


def extend(prior_fine: TnnPrior, coarse: ThetaLevel, rng: RngStream) -> ThetaLevel:
	if prior_fine.shape.level < 1 or coarse.shape != prior_fine.shape.at_level(prior_fine.shape.level - 1):
		raise ShapeError(f"cannot extend level {coarse.level} to level {prior_fine.shape.level}")
	return ThetaLevel(prior_fine.shape, extend_batch(prior_fine, coarse.values, rng.generator())[0])


def log_density_batch(prior: TnnPrior, params: np.ndarray) -> np.ndarray:
	params = np.atleast_2d(params)
	if params.shape[1] != prior.shape.param_count:
		raise ShapeError(f"expected {prior.shape.param_count} parameters, got {params.shape[1]}")
	return norm.logpdf(params, scale=prior.std).sum(axis=1)


def log_density(prior: TnnPrior, theta: ThetaLevel) -> float:
	if theta.shape != prior.shape:
		raise ShapeError(f"prior is for {prior.shape}, theta is {theta.shape}")
	return float(log_density_batch(prior, theta.values)[0])


def log_increment_density(prior_fine: TnnPrior, fine: np.ndarray) -> np.ndarray:
	"""
	log q_l of the new block of each fine row, i.e. the prior log-density of the new entries only
	"""
	mask = prior_fine._new_mask
	fine = np.atleast_2d(fine)
	return norm.logpdf(fine[:, mask], scale=prior_fine.std[mask]).sum(axis=1)


def _coupled_rows(gen, alpha, rows, a_c, a_f, shared_rows, new_rows):
	"""
	Joint draw of the next pre-activations given coarse inputs a_c (S, nc) and fine inputs a_f (S, nf).

	Row i of A_d is shared on its first nc columns, so (coarse_i, fine_i) is bivariate Gaussian
	with covariance i^-alpha [[Scc, Scf], [Scf, Sff]] plus the independent new-column part.
	"""
	S, nc = a_c.shape
	nf = a_f.shape[1]
	col = np.arange(1, nf + 1, dtype=np.float64) ** -alpha
	s_cc = (a_c ** 2) @ col[:nc]
	s_cf = (a_c * a_f[:, :nc]) @ col[:nc]
	s_ff = (a_f[:, :nc] ** 2) @ col[:nc]
	s_new = (a_f[:, nc:] ** 2) @ col[nc:]
	root_cc = np.sqrt(s_cc)
	ratio = np.divide(s_cf, root_cc, out=np.zeros_like(s_cf), where=root_cc > 0)
	resid = np.sqrt(np.maximum(s_ff - ratio ** 2, 0.0))

	scale = np.arange(1, rows + 1, dtype=np.float64) ** (-alpha / 2)
	shared = scale[:shared_rows]
	z = gen.standard_normal((4, S, shared_rows))
	bias = shared * z[3]
	coarse = shared * root_cc[:, None] * z[0] + bias
	fine = shared * (ratio[:, None] * z[0] + resid[:, None] * z[1] + np.sqrt(s_new)[:, None] * z[2]) + bias
	if new_rows:
		extra = scale[shared_rows:] * np.sqrt(s_ff + s_new + 1.0)[:, None] * gen.standard_normal((S, new_rows))
		fine = np.concatenate([fine, extra], axis=1)
	return coarse, fine


def sample_coupled_outputs(prior_fine: TnnPrior, x, count: int, gen: np.random.Generator):
	"""
	Draw (f_l(x), f_{l-1}(x)) under the coupled prior without materialising the weight matrices.

	Returns two (count, m) arrays (fine, coarse). Exact in law; O(D n_l) work per draw.
	"""
	shape = prior_fine.shape
	if shape.level < 1:
		raise ShapeError("coupled outputs need level >= 1")
	x = np.asarray(x, dtype=np.float64).reshape(-1)
	if x.size != shape.input_dim:
		raise ShapeError(f"x must have length {shape.input_dim}")
	alpha, act = prior_fine.alpha, prior_fine.activation
	nf, nc = shape.hidden_width, shape.hidden_width // 2

	# First layer: all input columns shared, so shared rows coincide exactly.
	col = np.arange(1, x.size + 1, dtype=np.float64) ** -alpha
	row = np.arange(1, nf + 1, dtype=np.float64) ** (-alpha / 2)
	h_f = row * np.sqrt(col @ x ** 2 + 1.0) * gen.standard_normal((count, nf))
	h_c = h_f[:, :nc]
	for _ in range(shape.depth - 2):
		h_c, h_f = _coupled_rows(gen, alpha, nf, act.apply(h_c), act.apply(h_f), nc, nf - nc)
	m = shape.output_dim
	f_c, f_f = _coupled_rows(gen, alpha, m, act.apply(h_c), act.apply(h_f), m, 0)
	return f_f, f_c


def sample_coupled_outputs_dense(prior_fine: TnnPrior, x, count: int, gen: np.random.Generator):
	"""
	Same law as sample_coupled_outputs, by sampling coarse parameters, extending and evaluating
	"""
	coarse_prior = prior_fine.at_level(prior_fine.shape.level - 1)
	coarse = sample_batch(coarse_prior, count, gen)
	fine = extend_batch(prior_fine, coarse, gen)
	x = np.asarray(x, dtype=np.float64).reshape(1, -1)
	f_f = forward_batch(prior_fine.shape, fine, prior_fine.activation, x)[:, 0, :]
	f_c = forward_batch(coarse_prior.shape, coarse, prior_fine.activation, x)[:, 0, :]
	return f_f, f_c


class RateRow(NamedTuple):
	level: int
	estimate: float
	std_error: float


def increment_second_moment(alpha: float, depth: int, act: Activation, levels, x, samples_per_level: int,
		rng: RngStream, output_dim: int = 1, method: str = "exact") -> list[RateRow]:
	"""
	Monte Carlo estimate of E|f_l(x) - f_{l-1}(x)|^2 under the coupled prior, per level
	"""
	if samples_per_level < 1000:
		raise DomainError("samples_per_level must be >= 1000")
	x = np.asarray(x, dtype=np.float64).reshape(-1)
	draw = sample_coupled_outputs if method == "exact" else sample_coupled_outputs_dense
	chunk = _CHUNK if method == "exact" else 64
	rows = []
	for level in levels:
		prior = TnnPrior(alpha, NetworkShape(depth, x.size, output_dim, level), act)
		gen = rng.child("increment", level).generator()
		total = total_sq = 0.0
		done = 0
		while done < samples_per_level:
			count = min(chunk, samples_per_level - done)
			f_f, f_c = draw(prior, x, count, gen)
			d2 = ((f_f - f_c) ** 2).sum(axis=1)
			total += d2.sum()
			total_sq += (d2 ** 2).sum()
			done += count
		mean = total / done
		var = max(total_sq / done - mean ** 2, 0.0) * done / (done - 1)
		rows.append(RateRow(level, mean, float(np.sqrt(var / done))))
		logger.debug("increment second moment level=%d estimate=%.3e", level, mean)
	return rows
