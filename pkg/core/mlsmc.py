"""Multilevel SMC sampler on the nested parameter spaces, and its telescoping estimator.

Population l (l = 0..L-1) holds P_l particles on Theta_{base+l}. Population 0 comes from a tempered
SMC pass at the base level (or i.i.d. prior draws weighted by G_0 when bridging is off); population l
is obtained from population l-1 by

- resampling with weights G_{l-1}
- n_steps pCN moves targeting the posterior of the coarse level
- appending fresh prior draws for the new block (extension to the next level)
- when the ESS of G_l collapses, applying G_l in tempered stages with pCN moves in between

G_0 = p_base(y | theta) and G_l = p_{base+l}(y | theta) / p_{base+l-1}(y | coarse block).
The estimator of E[f_L] is the level-0 self-normalised mean plus, per finer population, the
self-normalised mean of f at the fine level minus the plain mean of f at the coarse block.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import constants
from .exceptions import ConfigurationError, CouplingError, DegeneracyError
from .likelihoods import LikelihoodModel
from .nn import Activation, NetworkShape, ThetaLevel, embed_check, embed_index
from .prior import TnnPrior, extend_batch, sample_batch
from .rng import RngStream
from .smc import (
	MAX_STAGES, MULTINOMIAL, MutationConfig, ParticlePopulation, TemperedPath, ess, next_temperature, normalize, pcn_kernel,
	resample_indices, run_smc_tempered,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MlsmcConfig:
	L: int
	sample_sizes: tuple[int, ...]
	alpha: float = 2.0
	activation: Activation = Activation.TANH
	mutation: MutationConfig = field(default_factory=MutationConfig)
	resampling: str = MULTINOMIAL
	min_ess: float = constants.MIN_ESS
	# level of population 0; the finest level is base_level + L - 1
	base_level: int = 1
	# ESS fraction kept by tempered stages; None draws population 0 from the prior and applies G in one step
	bridge_ess: float | None = constants.BRIDGE_ESS_FRACTION

	def __post_init__(self):
		object.__setattr__(self, "sample_sizes", tuple(int(p) for p in self.sample_sizes))
		if self.L < 2:
			raise ConfigurationError(f"L must be >= 2, got {self.L}")
		if len(self.sample_sizes) != self.L:
			raise ConfigurationError(f"expected {self.L} sample sizes, got {len(self.sample_sizes)}")
		if min(self.sample_sizes) < 1:
			raise ConfigurationError("sample sizes must be positive")
		if any(a < b for a, b in zip(self.sample_sizes, self.sample_sizes[1:])):
			raise ConfigurationError("sample sizes must be non-increasing")
		if self.base_level < 0:
			raise ConfigurationError("base_level must be >= 0")
		if self.bridge_ess is not None and not 0.0 < self.bridge_ess < 1.0:
			raise ConfigurationError(f"bridge_ess must lie in (0, 1), got {self.bridge_ess}")

	@property
	def finest_level(self) -> int:
		return self.base_level + self.L - 1

	def level_of(self, index: int) -> int:
		return self.base_level + index

	def describe(self) -> dict:
		return {
			"L": self.L,
			"sample_sizes": list(self.sample_sizes),
			"alpha": self.alpha,
			"activation": self.activation.value,
			"n_steps": self.mutation.n_steps,
			"pcn_rho": self.mutation.pcn_rho,
			"resampling": self.resampling,
			"min_ess": self.min_ess,
			"base_level": self.base_level,
			"bridge_ess": self.bridge_ess,
			"adapt": self.mutation.adapt,
		}


@dataclass(frozen=True, eq=False)
class MlEstimate:
	value: np.ndarray
	level0_term: np.ndarray
	level_terms: tuple[np.ndarray, ...]
	second_moment: np.ndarray
	total_cost: float
	diagnostics: dict = field(default_factory=dict)

	def variance(self) -> np.ndarray:
		"""
		Coordinate-wise posterior predictive variance, E[f^2] - E[f]^2, clipped at 0
		"""
		return np.maximum(self.second_moment - self.value ** 2, 0.0)


def incremental_weight(theta_fine: ThetaLevel, theta_coarse: ThetaLevel, model: LikelihoodModel) -> float:
	"""
	log G = log p_l(y | fine) - log p_{l-1}(y | coarse)
	"""
	if not embed_check(theta_coarse, theta_fine):
		raise CouplingError(f"level {theta_coarse.level} parameters are not the leading block of level {theta_fine.level}")
	return model.log_lik(theta_fine) - model.log_lik(theta_coarse)


def coarse_block(shape: NetworkShape, params: np.ndarray) -> np.ndarray:
	return np.atleast_2d(params)[:, embed_index(shape.at_level(shape.level - 1), shape)]


def mutate_extend(population: ParticlePopulation, prior_fine: TnnPrior, model: LikelihoodModel, cfg: MutationConfig,
		rng: RngStream, size: int | None = None, scheme: str = MULTINOMIAL, bridge_ess: float | None = None,
		x=None) -> ParticlePopulation:
	"""
	Resample size indices by the population weights, move them with pCN at their own level,
	then extend to the level of prior_fine. The result carries log G of the new population.

	With bridge_ess set, a log G whose ESS falls below bridge_ess * size is applied in tempered
	stages (see _bridge); the result then holds the leftover weights and a TemperedPath evaluated at x.
	"""
	coarse_shape = population.shape
	if prior_fine.shape != coarse_shape.at_level(coarse_shape.level + 1):
		raise ConfigurationError(f"prior is for level {prior_fine.shape.level}, population is level {coarse_shape.level}")
	size = population.size if size is None else size
	gen = rng.generator()

	idx = resample_indices(population.weights, size, gen, scheme)
	params = population.particles[idx]
	if population.log_lik is not None:
		log_lik = population.log_lik[idx]
	else:
		log_lik = model.log_lik_batch(coarse_shape, params)
	move = pcn_kernel(params, log_lik[:, None], [1.0], lambda p: model.log_lik_batch(coarse_shape, p)[:, None],
		prior_fine.at_level(coarse_shape.level), cfg, gen, rho=population.diagnostics.get("rho"))
	params, log_lik = move.params, move.parts[:, 0]

	fine = extend_batch(prior_fine, params, gen)
	fine_lik = model.log_lik_batch(prior_fine.shape, fine)
	cost = constants.param_touches(size, move.steps, prior_fine.shape.param_count)
	log_g = fine_lik - log_lik
	if bridge_ess is not None and ess(log_g) < bridge_ess * size:
		return _bridge(params, log_lik, fine, fine_lik, idx, prior_fine, model, cfg, gen, scheme, bridge_ess, x,
			acceptance=move.acceptance, rho=move.rho, cost=cost)
	return ParticlePopulation(
		level=prior_fine.shape.level,
		shape=prior_fine.shape,
		particles=fine,
		log_weights=log_g,
		log_lik=fine_lik,
		ancestors=idx,
		acceptance=move.acceptance,
		cost=cost,
		diagnostics={"rho": move.rho},
	)


def _bridge(coarse, coarse_lik, fine, fine_lik, idx, prior_fine, model, cfg, gen, scheme, bridge_ess, x, acceptance,
		rho, cost) -> ParticlePopulation:
	"""
	Apply G to the extended particles through prior_fine * p_{l-1}(y | coarse block)^(1-t) * p_l(y | fine)^t.

	Temperatures are chosen so each stage keeps the ESS at bridge_ess * P; stages are separated by
	resampling (when the ESS asks for it) and pCN moves on the whole fine vector. No move follows
	the last stage. At x, the level's increment is the plain mean of f_l minus the plain mean of
	f_{l-1} at t = 0, plus the weighted mean after each reweighting minus the one before it.
	"""
	fine_shape = prior_fine.shape
	coarse_shape = fine_shape.at_level(fine_shape.level - 1)
	size = fine.shape[0]

	def evaluate(params):
		return np.column_stack([
			model.log_lik_batch(coarse_shape, coarse_block(fine_shape, params)),
			model.log_lik_batch(fine_shape, params),
		])

	parts = np.column_stack([coarse_lik, fine_lik])
	track = x is not None
	if track:
		x = np.atleast_2d(np.asarray(x, dtype=np.float64))
		f = model.predict_batch(fine_shape, fine, x)
		fc = model.predict_batch(coarse_shape, coarse, x)
		increment = f.mean(axis=0) - fc.mean(axis=0)
		second = (f ** 2).mean(axis=0) - (fc ** 2).mean(axis=0)
	log_w = np.zeros(size)
	temps, rhos, rates = [0.0], [], []
	steps = 0
	target = bridge_ess * size

	while temps[-1] < 1.0:
		if len(temps) > MAX_STAGES:
			raise DegeneracyError("bridge did not reach t = 1")
		t = temps[-1]
		log_g = parts[:, 1] - parts[:, 0]
		t_new = next_temperature(log_w, log_g, t, target)
		before = normalize(log_w)
		log_w = log_w + (t_new - t) * log_g
		if not np.isfinite(np.max(log_w)):
			raise DegeneracyError("incremental weights underflowed")
		if track:
			shift = normalize(log_w) - before
			increment = increment + np.tensordot(shift, f, axes=(0, 0))
			second = second + np.tensordot(shift, f ** 2, axes=(0, 0))
		temps.append(t_new)
		if t_new >= 1.0:
			break
		if ess(log_w) < target:
			pick = resample_indices(normalize(log_w), size, gen, scheme)
			fine, parts, log_w = fine[pick], parts[pick], np.zeros(size)
		move = pcn_kernel(fine, parts, [1.0 - t_new, t_new], evaluate, prior_fine, cfg, gen, rho=rho)
		fine, parts, rho = move.params, move.parts, move.rho
		steps += move.steps
		rhos.append(rho)
		rates.append(move.acceptance)
		if track:
			f = model.predict_batch(fine_shape, fine, x)

	logger.debug("mlsmc bridge level=%d stages=%d steps=%d", fine_shape.level, len(temps) - 1, steps)
	cost += constants.param_touches(size, steps, fine_shape.param_count + coarse_shape.param_count)
	path = TemperedPath(tuple(temps), tuple(rhos), x if track else None, increment if track else None,
		second if track else None)
	return ParticlePopulation(
		level=fine_shape.level,
		shape=fine_shape,
		particles=fine,
		log_weights=log_w,
		log_lik=parts[:, 1],
		ancestors=idx,
		acceptance=acceptance,
		cost=cost,
		path=path,
		diagnostics={"rho": rho, "bridge_acceptance": rates},
	)


def _guard(population: ParticlePopulation, index: int, min_ess: float) -> float:
	try:
		value = ess(population.log_weights)
	except DegeneracyError as exc:
		raise DegeneracyError(str(exc), level=index) from exc
	threshold = min(min_ess, population.size / 2)
	if value < threshold:
		raise DegeneracyError(f"ESS {value:.2f} below {threshold:.2f}", level=index)
	return value


def _first_population(config: MlsmcConfig, prior0: TnnPrior, model: LikelihoodModel, rng: RngStream) -> ParticlePopulation:
	P0 = config.sample_sizes[0]
	shape0 = prior0.shape
	if config.bridge_ess is None:
		gen = rng.generator()
		params = sample_batch(prior0, P0, gen)
		log_lik = model.log_lik_batch(shape0, params)
		cost = constants.param_touches(P0, config.mutation.n_steps, shape0.param_count)
		return ParticlePopulation(shape0.level, shape0, params, log_lik, log_lik=log_lik, cost=cost)
	result = run_smc_tempered(model, prior0, P0, cfg=config.mutation, rng=rng, scheme=config.resampling,
		ess_fraction=config.bridge_ess)
	return result.population


def run_mlsmc(config: MlsmcConfig, model: LikelihoodModel, rng: RngStream,
		on_level: Callable[[int, ParticlePopulation], None] | None = None,
		resume: list[ParticlePopulation] | None = None, x=None) -> list[ParticlePopulation]:
	"""
	Populations 0..L-1; population l lives on level base_level + l and carries log G_l.

	With config.bridge_ess set, population 0 comes from a tempered SMC pass at the base level and
	collapsing reweightings are bridged in stages; x are the inputs at which bridged levels record
	their estimator increments. on_level(index, population) is called after each population is
	complete; resume continues from already computed leading populations (e.g. loaded checkpoints).
	"""
	shape0 = model.network_shape(config.base_level)
	prior0 = TnnPrior(config.alpha, shape0, config.activation)
	populations = list(resume or [])
	if len(populations) > config.L:
		raise ConfigurationError("more resumed populations than levels")

	if not populations:
		try:
			first = _first_population(config, prior0, model, rng.child("mlsmc", 0))
		except DegeneracyError as exc:
			raise DegeneracyError(str(exc), level=0) from exc
		populations.append(first)
		logger.debug("mlsmc population=0 level=%d P=%d", shape0.level, first.size)
		if on_level:
			on_level(0, first)

	for index in range(len(populations), config.L):
		prev = populations[-1]
		prev_ess = _guard(prev, index - 1, config.min_ess)
		prior = prior0.at_level(config.level_of(index))
		try:
			pop = mutate_extend(prev, prior, model, config.mutation, rng.child("mlsmc", index),
				size=config.sample_sizes[index], scheme=config.resampling, bridge_ess=config.bridge_ess, x=x)
		except DegeneracyError as exc:
			if exc.level is not None:
				raise
			raise DegeneracyError(str(exc), level=index) from exc
		populations.append(pop)
		logger.debug("mlsmc population=%d level=%d P=%d parent_ess=%.1f accept=%.2f stages=%d",
			index, pop.level, pop.size, prev_ess, pop.acceptance, pop.path.stages if pop.path else 1)
		if on_level:
			on_level(index, pop)

	_guard(populations[-1], config.L - 1, config.min_ess)
	return populations


def _ratio(population: ParticlePopulation, values: np.ndarray, index: int) -> np.ndarray:
	try:
		w = normalize(population.log_weights)
	except DegeneracyError as exc:
		raise DegeneracyError(str(exc), level=index) from exc
	return np.tensordot(w, values, axes=(0, 0))


def _path_terms(pop: ParticlePopulation, x: np.ndarray, index: int):
	path = pop.path
	if path.increment is None or path.inputs is None:
		raise ConfigurationError(f"population {index} was bridged without evaluation inputs")
	if path.inputs.shape != x.shape or not np.array_equal(path.inputs, x):
		raise ConfigurationError(f"population {index} was bridged at different inputs")
	return path.increment, path.second


def ml_estimate(populations: list[ParticlePopulation], model: LikelihoodModel, x) -> MlEstimate:
	"""
	Telescoping estimate of the posterior predictive mean at the finest level, per test input.

	Predictions come from model.predict_batch (network output, or class probabilities).
	value has shape (n_test, m). Bridged populations contribute the increments recorded along
	their path, which must have been evaluated at the same x.
	"""
	x = np.atleast_2d(np.asarray(x, dtype=np.float64))
	first = populations[0]
	f0 = model.predict_batch(first.shape, first.particles, x)
	level0 = _ratio(first, f0, 0)
	second = _ratio(first, f0 ** 2, 0)

	terms = []
	increments = []
	for index, pop in enumerate(populations[1:], start=1):
		fine = model.predict_batch(pop.shape, pop.particles, x)
		coarse_shape = pop.shape.at_level(pop.shape.level - 1)
		coarse = model.predict_batch(coarse_shape, coarse_block(pop.shape, pop.particles), x)
		if pop.path is not None:
			term, term_second = _path_terms(pop, x, index)
		else:
			term = _ratio(pop, fine, index) - coarse.mean(axis=0)
			term_second = _ratio(pop, fine ** 2, index) - (coarse ** 2).mean(axis=0)
		terms.append(term)
		second = second + term_second
		# weighted spread of the per-particle coupled difference, averaged over inputs and outputs
		delta = fine - coarse
		spread = _ratio(pop, (delta - _ratio(pop, delta, index)) ** 2, index)
		increments.append({
			"mean": float(term.mean()),
			"abs_max": float(np.abs(term).max()),
			"variance": float(spread.mean()),
			"stages": pop.path.stages if pop.path else 1,
		})

	value = level0 + sum(terms, np.zeros_like(level0))
	diagnostics = {
		"sample_sizes": [p.size for p in populations],
		"levels": [p.level for p in populations],
		"ess": [ess(p.log_weights) for p in populations],
		"acceptance": [p.acceptance for p in populations[1:]],
		"increments": increments,
	}
	if "log_evidence" in first.diagnostics:
		diagnostics["log_evidence_base"] = first.diagnostics["log_evidence"]
	return MlEstimate(
		value=value,
		level0_term=level0,
		level_terms=tuple(terms),
		second_moment=second,
		total_cost=float(sum(p.cost for p in populations)),
		diagnostics=diagnostics,
	)


def allocate_samples(budget: float, beta: float, gamma: float, n_populations: int, costs=None,
		min_size: int = constants.MIN_SAMPLES) -> tuple[int, ...]:
	"""
	P_l proportional to 2^{-l(beta+gamma)/2}, scaled so that sum P_l C_l meets the budget.

	costs are the per-particle costs C_l (default 2^{gamma l}). Sizes are floored at min_size,
	rounded down and made non-increasing. A single population gets floor(budget / C_0).
	"""
	if beta <= 0 or gamma <= 0:
		raise ConfigurationError("beta and gamma must be positive")
	if n_populations < 1:
		raise ConfigurationError("n_populations must be >= 1")
	levels = np.arange(n_populations, dtype=np.float64)
	costs = 2.0 ** (gamma * levels) if costs is None else np.asarray(costs, dtype=np.float64)
	if costs.shape != levels.shape or np.any(costs <= 0):
		raise ConfigurationError("one positive cost per population is required")
	if budget < min_size * costs.sum():
		raise ConfigurationError(f"budget {budget:g} cannot cover {min_size} particles per population")
	if n_populations == 1:
		return (int(budget // costs[0]),)

	shares = 2.0 ** (-levels * (beta + gamma) / 2)
	sizes = np.floor(np.maximum(shares * budget / np.dot(shares, costs), min_size))
	sizes = np.minimum.accumulate(sizes)
	return tuple(int(p) for p in sizes)


def level_costs(sample_sizes, n_steps: int, family: NetworkShape, first_level: int = 1) -> np.ndarray:
	return np.array([
		constants.param_touches(p, n_steps, family.at_level(first_level + l).param_count)
		for l, p in enumerate(sample_sizes)
	])


def total_cost(config: MlsmcConfig, family: NetworkShape) -> float:
	"""
	sum_l P_l * n_steps * param_count(level of population l)
	"""
	return float(level_costs(config.sample_sizes, config.mutation.n_steps, family, config.base_level).sum())
