"""Particle-population machinery shared by both samplers.


- ParticlePopulation: parameter vectors of one level with log-weights and cached log-likelihoods
- ess / resampling (multinomial by default, systematic behind a flag)
- pCN mutation: theta' = rho*theta + sqrt(1 - rho^2)*xi, xi ~ prior; accepted on the
  likelihood ratio only, since the proposal is reversible w.r.t. the Gaussian prior
- pcn_kernel: the same move on a sum of tempered log-likelihood terms, optionally retuning rho
  toward an acceptance band (controlled-acceptance moves)
- run_smc_tempered: single-level baseline over prior * likelihood^t, 0 = t_0 < ... < t_K = 1,
  with the next temperature chosen by bisection on the ESS when no schedule is given
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from . import constants
from .exceptions import ConfigurationError, DegeneracyError
from .likelihoods import LikelihoodModel
from .nn import NetworkShape, ThetaLevel
from .prior import TnnPrior, sample_batch
from .rng import RngStream

logger = logging.getLogger(__name__)

MULTINOMIAL = "multinomial"
SYSTEMATIC = "systematic"

# Upper bound on adaptive tempering stages before the run is declared degenerate.
MAX_STAGES = 10_000


@dataclass(frozen=True)
class MutationConfig:
	n_steps: int = constants.PCN_STEPS
	pcn_rho: float = constants.PCN_RHO
	# steer rho into accept_band before the n_steps moves
	adapt: bool = False
	accept_band: tuple[float, float] = constants.ACCEPT_BAND

	def __post_init__(self):
		if not 0.0 < self.pcn_rho < 1.0:
			raise ConfigurationError(f"pcn_rho must lie in (0, 1), got {self.pcn_rho}")
		# n_steps = 0 means pure extension (no kernel move)
		if self.n_steps < 0:
			raise ConfigurationError(f"n_steps must be >= 0, got {self.n_steps}")
		lo, hi = self.accept_band
		if not 0.0 < lo < hi < 1.0:
			raise ConfigurationError(f"accept_band must satisfy 0 < lo < hi < 1, got {self.accept_band}")


@dataclass(frozen=True, eq=False)
class TemperedPath:
	"""
	Stages of a level bridged from the coarse posterior (t = 0) to the fine one (t = 1).

	increment / second are the level's contributions to E[f] and E[f^2] at inputs, accumulated stage
	by stage on the particles that carried each reweighting; None when no inputs were supplied.
	"""
	temperatures: tuple[float, ...]
	rhos: tuple[float, ...] = ()
	inputs: np.ndarray | None = None
	increment: np.ndarray | None = None
	second: np.ndarray | None = None

	@property
	def stages(self) -> int:
		return len(self.temperatures) - 1


@dataclass(frozen=True, eq=False)
class ParticlePopulation:
	"""
	P particles on Theta_level, one row each.

	log_weights are unnormalised; log_lik caches log p_level(y | particle).
	"""
	level: int
	shape: NetworkShape
	particles: np.ndarray
	log_weights: np.ndarray
	log_lik: np.ndarray | None = None
	ancestors: np.ndarray | None = None
	acceptance: float | None = None
	cost: float = 0.0
	path: TemperedPath | None = None
	diagnostics: dict = field(default_factory=dict)

	def __post_init__(self):
		particles = np.atleast_2d(np.asarray(self.particles, dtype=np.float64))
		log_weights = np.asarray(self.log_weights, dtype=np.float64).reshape(-1)
		if log_weights.size != particles.shape[0]:
			raise ConfigurationError("one log-weight per particle is required")
		if particles.shape[1] != self.shape.param_count:
			raise ConfigurationError("particle dimension does not match the network shape")
		object.__setattr__(self, "particles", particles)
		object.__setattr__(self, "log_weights", log_weights)

	@property
	def size(self) -> int:
		return self.particles.shape[0]

	@property
	def weights(self) -> np.ndarray:
		return normalize(self.log_weights)

	def theta(self, i: int) -> ThetaLevel:
		return ThetaLevel(self.shape, self.particles[i])


def normalize(log_weights) -> np.ndarray:
	lw = np.asarray(log_weights, dtype=np.float64)
	top = np.max(lw)
	if not np.isfinite(top):
		raise DegeneracyError("all weights are zero or non-finite")
	w = np.exp(lw - top)
	return w / w.sum()


def ess(log_weights) -> float:
	w = normalize(log_weights)
	return float(1.0 / np.sum(w ** 2))


def resample_indices(weights: np.ndarray, size: int, gen: np.random.Generator, scheme: str = MULTINOMIAL) -> np.ndarray:
	"""
	Ancestor indices of size draws from the categorical law of weights
	"""
	cdf = np.cumsum(weights)
	cdf[-1] = 1.0
	if scheme == MULTINOMIAL:
		u = gen.uniform(size=size)
	elif scheme == SYSTEMATIC:
		u = (gen.uniform() + np.arange(size)) / size
	else:
		raise ConfigurationError(f"unknown resampling scheme {scheme!r}")
	return np.minimum(np.searchsorted(cdf, u, side="right"), len(weights) - 1)


def resample(population: ParticlePopulation, rng: RngStream | np.random.Generator, size: int | None = None,
		scheme: str = MULTINOMIAL) -> ParticlePopulation:
	gen = rng.generator() if isinstance(rng, RngStream) else rng
	size = population.size if size is None else size
	idx = resample_indices(population.weights, size, gen, scheme)
	return replace(
		population,
		particles=population.particles[idx],
		log_weights=np.zeros(size),
		log_lik=None if population.log_lik is None else population.log_lik[idx],
		ancestors=idx,
	)


def resample_multinomial(population: ParticlePopulation, rng: RngStream | np.random.Generator) -> ParticlePopulation:
	return resample(population, rng, scheme=MULTINOMIAL)


def resample_systematic(population: ParticlePopulation, rng: RngStream | np.random.Generator) -> ParticlePopulation:
	return resample(population, rng, scheme=SYSTEMATIC)


@dataclass(frozen=True, eq=False)
class MoveResult:
	params: np.ndarray
	parts: np.ndarray
	acceptance: float
	rho: float
	steps: int


def _pcn_sweep(params, parts, coef, evaluate, std, rho, n_steps, gen):
	active = coef != 0.0
	scale = np.sqrt((1.0 - rho) * (1.0 + rho)) * std
	accepted = 0
	for _ in range(n_steps):
		proposal = rho * params + scale * gen.standard_normal(params.shape)
		prop_parts = evaluate(proposal)
		log_ratio = (prop_parts[:, active] - parts[:, active]) @ coef[active]
		accept = np.log(gen.uniform(size=params.shape[0])) < np.where(np.isnan(log_ratio), -np.inf, log_ratio)
		params[accept] = proposal[accept]
		parts[accept] = prop_parts[accept]
		accepted += int(accept.sum())
	rate = accepted / (n_steps * params.shape[0]) if n_steps else 1.0
	return params, parts, rate


def _adjust_rho(rho: float, rate: float, band) -> float | None:
	"""
	New rho when rate is outside band, None when it is inside
	"""
	lo, hi = band
	if lo <= rate <= hi:
		return None
	step = np.sqrt((1.0 - rho) * (1.0 + rho))
	step = step / constants.ACCEPT_FACTOR if rate < lo else step * constants.ACCEPT_FACTOR
	step = float(np.clip(step, 1e-8, 0.999))
	return float(np.sqrt(1.0 - step ** 2))


def pcn_kernel(params: np.ndarray, parts: np.ndarray, coef, evaluate: Callable[[np.ndarray], np.ndarray], prior: TnnPrior,
		cfg: MutationConfig, gen: np.random.Generator, rho: float | None = None) -> MoveResult:
	"""
	pCN moves for every row of params, targeting prior * exp(parts @ coef).

	parts is (P, K), one column per log-likelihood term, and evaluate(params) recomputes it;
	terms with coef 0 are never touched, so -inf entries there are harmless. With cfg.adapt,
	single steps are taken first while the acceptance rate is outside cfg.accept_band, shrinking
	or growing the step sqrt(1 - rho^2) each time; then cfg.n_steps steps run at the settled rho.
	Every step taken is counted in steps.
	"""
	params = np.array(params, dtype=np.float64, copy=True)
	parts = np.array(parts, dtype=np.float64, copy=True).reshape(params.shape[0], -1)
	coef = np.asarray(coef, dtype=np.float64).reshape(-1)
	rho = cfg.pcn_rho if rho is None else rho
	steps = 0
	if cfg.adapt and cfg.n_steps:
		for _ in range(constants.ACCEPT_MAX_ITER):
			params, parts, rate = _pcn_sweep(params, parts, coef, evaluate, prior.std, rho, 1, gen)
			steps += 1
			new_rho = _adjust_rho(rho, rate, cfg.accept_band)
			if new_rho is None:
				break
			logger.debug("pcn acceptance %.2f outside %s; rho %.6f -> %.6f", rate, cfg.accept_band, rho, new_rho)
			rho = new_rho
	params, parts, rate = _pcn_sweep(params, parts, coef, evaluate, prior.std, rho, cfg.n_steps, gen)
	return MoveResult(params, parts, rate, rho, steps + cfg.n_steps)


def pcn_move(params: np.ndarray, log_lik: np.ndarray, prior: TnnPrior, model: LikelihoodModel, cfg: MutationConfig,
		gen: np.random.Generator, temperature: float = 1.0):
	"""
	cfg.n_steps pCN steps for every row of params, targeting prior * likelihood^temperature.

	Returns (params, log_lik, acceptance rate).
	"""
	move = pcn_kernel(params, np.reshape(log_lik, (-1, 1)), [temperature],
		lambda p: model.log_lik_batch(prior.shape, p)[:, None], prior, replace(cfg, adapt=False), gen)
	return move.params, move.parts[:, 0], move.acceptance


def pcn_step(theta: ThetaLevel, prior: TnnPrior, model: LikelihoodModel, cfg: MutationConfig, rng: RngStream) -> ThetaLevel:
	ll = np.array([model.log_lik(theta)])
	params, _, _ = pcn_move(theta.values[None, :], ll, prior, model, cfg, rng.generator())
	return ThetaLevel(theta.shape, params[0])


@dataclass(frozen=True, eq=False)
class SmcResult:
	population: ParticlePopulation
	log_evidence: float
	temperatures: tuple[float, ...]
	cost: float
	resample_count: int
	acceptance: tuple[float, ...]
	rhos: tuple[float, ...] = ()
	steps: int = 0


def next_temperature(log_weights, log_lik, current, target_ess):
	remaining = 1.0 - current

	def gap(delta):
		return ess(log_weights + delta * log_lik) - target_ess

	if gap(remaining) >= 0:
		return 1.0
	if gap(0.0) <= 0:
		return min(1.0, current + 1e-12)
	return current + brentq(gap, 0.0, remaining, xtol=1e-12)


def run_smc_tempered(model: LikelihoodModel, prior: TnnPrior, P: int, schedule=None, cfg: MutationConfig | None = None,
		rng: RngStream | None = None, scheme: str = MULTINOMIAL, ess_fraction: float = 0.5) -> SmcResult:
	"""
	Likelihood-tempered SMC at a single level. Cost = P * (kernel steps taken) * param_count.

	With cfg.adapt the pCN rho is retuned at every stage, starting from the previous stage's value;
	the settled values are returned in rhos.
	"""
	cfg = cfg or MutationConfig()
	rng = rng or RngStream(0)
	if P < 2:
		raise ConfigurationError("the tempered sampler needs P >= 2")
	if schedule is not None:
		schedule = np.asarray(schedule, dtype=np.float64)
		if schedule[0] != 0.0 or schedule[-1] != 1.0 or np.any(np.diff(schedule) <= 0):
			raise ConfigurationError("schedule must increase strictly from 0 to 1")

	gen = rng.child("smc").generator()
	shape = prior.shape
	params = sample_batch(prior, P, gen)
	log_lik = model.log_lik_batch(shape, params)
	log_w = np.zeros(P)
	log_z = 0.0
	temps = [0.0]
	acceptance = []
	rhos = []
	rho = cfg.pcn_rho
	steps = 0
	resamples = 0
	target = ess_fraction * P

	while temps[-1] < 1.0:
		if len(temps) > MAX_STAGES:
			raise DegeneracyError("tempering did not reach t = 1", level=shape.level)
		t = temps[-1]
		t_new = float(schedule[len(temps)]) if schedule is not None else next_temperature(log_w, log_lik, t, target)
		inc = (t_new - t) * log_lik
		prev = logsumexp(log_w)
		log_w = log_w + inc
		if not np.isfinite(np.max(log_w)):
			raise DegeneracyError("incremental weights underflowed", level=shape.level)
		log_z += logsumexp(log_w) - prev
		if ess(log_w) < target:
			idx = resample_indices(normalize(log_w), P, gen, scheme)
			params, log_lik, log_w = params[idx], log_lik[idx], np.zeros(P)
			resamples += 1
		move = pcn_kernel(params, log_lik[:, None], [t_new], lambda p: model.log_lik_batch(shape, p)[:, None],
			prior, cfg, gen, rho=rho)
		params, log_lik, rho = move.params, move.parts[:, 0], move.rho
		steps += move.steps
		acceptance.append(move.acceptance)
		rhos.append(rho)
		temps.append(t_new)
		logger.debug("smc stage=%d t=%.4g ess=%.1f accept=%.2f rho=%.6f", len(temps) - 1, t_new, ess(log_w),
			move.acceptance, rho)

	cost = constants.param_touches(P, steps, shape.param_count)
	population = ParticlePopulation(shape.level, shape, params, log_w, log_lik=log_lik, acceptance=float(np.mean(acceptance)),
		cost=cost, diagnostics={"log_evidence": float(log_z), "temperatures": list(temps), "rhos": list(rhos), "rho": rho})
	logger.debug("smc level=%d P=%d stages=%d log_z=%.3f", shape.level, P, len(temps) - 1, log_z)
	return SmcResult(population, float(log_z), tuple(temps), cost, resamples, tuple(acceptance), tuple(rhos), steps)


def weighted_mean(population: ParticlePopulation, values: np.ndarray) -> np.ndarray:
	"""
	Self-normalised mean of per-particle values (P, ...)
	"""
	w = population.weights
	return np.tensordot(w, values, axes=(0, 0))
