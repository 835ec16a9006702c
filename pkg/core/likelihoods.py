"""Likelihood models for regression, classification and inverse reinforcement learning.

A LikelihoodModel owns its data and the network family (depth, input/output dims) and evaluates
log p_l(y | theta_l) for a whole population of parameter vectors at once. predict_batch returns
the predictive quantity whose posterior mean is estimated: the network output for regression,
class probabilities for classification, the scalar value for RL.
"""

from abc import ABC, abstractmethod

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import log_ndtr, log_softmax, logsumexp, softmax

from . import constants
from .datasets import ClassificationData, RegressionData, RlTrajectory
from .exceptions import ConfigurationError, DomainError, ShapeError
from .nn import Activation, NetworkShape, ThetaLevel, forward_batch

# Particles evaluated together in the RL likelihood (bounds the (P, T, M, K) buffer).
_RL_CHUNK = 64


class LikelihoodModel(ABC):
	"""
	log_lik(theta) for one network, log_lik_batch(shape, params) for a (P, d) population
	"""
	name = "model"

	def __init__(self, activation: Activation, depth: int, input_dim: int, output_dim: int):
		self.activation = activation
		self.depth = depth
		self.input_dim = input_dim
		self.output_dim = output_dim

	def network_shape(self, level: int) -> NetworkShape:
		return NetworkShape(self.depth, self.input_dim, self.output_dim, level)

	def _check(self, shape: NetworkShape):
		if (shape.depth, shape.input_dim, shape.output_dim) != (self.depth, self.input_dim, self.output_dim):
			raise ShapeError(f"{self.name} model expects depth {self.depth}, dims {self.input_dim}->{self.output_dim}")

	@abstractmethod
	def log_lik_batch(self, shape: NetworkShape, params: np.ndarray) -> np.ndarray:
		...

	def log_lik(self, theta: ThetaLevel) -> float:
		return float(self.log_lik_batch(theta.shape, theta.values[None, :])[0])

	def predict_batch(self, shape: NetworkShape, params: np.ndarray, inputs) -> np.ndarray:
		"""
		(P, k, m) predictive values at k inputs
		"""
		return forward_batch(shape, params, self.activation, inputs)

	def describe(self) -> dict:
		return {"model": self.name, "depth": self.depth, "input_dim": self.input_dim,
			"output_dim": self.output_dim, "activation": self.activation.value}


class FlatLikelihood(LikelihoodModel):
	"""
	No data: log p = 0, so the posterior is the prior
	"""
	name = "flat"

	def log_lik_batch(self, shape, params):
		self._check(shape)
		return np.zeros(np.atleast_2d(params).shape[0])


class RegressionModel(LikelihoodModel):
	name = "regression"

	def __init__(self, data: RegressionData, activation: Activation = Activation.TANH, depth: int = 3):
		super().__init__(activation, depth, data.input_dim, data.output_dim)
		self.data = data

	def log_lik_batch(self, shape, params):
		self._check(shape)
		f = forward_batch(shape, params, self.activation, self.data.inputs)
		var = self.data.noise_var
		resid = self.data.outputs[None] - f
		return -0.5 * ((resid ** 2 / var).sum(axis=(1, 2)) + self.data.size * np.log(2.0 * np.pi * var).sum())


class ClassificationModel(LikelihoodModel):
	name = "classification"

	def __init__(self, data: ClassificationData, activation: Activation = Activation.TANH, depth: int = 3):
		super().__init__(activation, depth, data.input_dim, data.n_classes)
		self.data = data

	def log_lik_batch(self, shape, params):
		self._check(shape)
		h = forward_batch(shape, params, self.activation, self.data.inputs)
		logp = log_softmax(h, axis=-1)
		return logp[:, np.arange(self.data.size), self.data.labels].sum(axis=1)

	def predict_batch(self, shape, params, inputs):
		return softmax(forward_batch(shape, params, self.activation, inputs), axis=-1)


def log_action_prob(values: np.ndarray, actions: np.ndarray, sigma: float, nodes: int = constants.GH_NODES) -> np.ndarray:
	"""
	log P(action | values) for the noisy argmax, values (..., M), actions (...).

	After t = v_a + sigma*sqrt(2)*s the integral is (1/sqrt(pi)) sum_k w_k prod_{i != a} Phi(g_i + sqrt(2) s_k),
	g_i = (v_a - v_i)/sigma; evaluated in log space.
	"""
	if not sigma > 0:
		raise DomainError("sigma must be positive")
	values = np.asarray(values, dtype=np.float64)
	actions = np.asarray(actions)
	M = values.shape[-1]
	if np.any(actions < 0) or np.any(actions >= M):
		raise DomainError(f"actions must lie in [0, {M})")
	s, w = hermgauss(nodes)
	va = np.take_along_axis(values, actions[..., None], axis=-1)
	g = (va - values) / sigma
	terms = log_ndtr(g[..., None] + np.sqrt(2.0) * s)
	chosen = np.arange(M) == actions[..., None]
	terms = np.where(chosen[..., None], 0.0, terms)
	return logsumexp(terms.sum(axis=-2) + np.log(w), axis=-1) - 0.5 * np.log(np.pi)


def rl_action_prob(v, a: int, sigma: float, nodes: int = constants.GH_NODES) -> float:
	v = np.asarray(v, dtype=np.float64).reshape(-1)
	if not 0 <= int(a) < v.size:
		raise DomainError(f"action {a} outside [0, {v.size})")
	return float(np.exp(log_action_prob(v, np.asarray(int(a)), sigma, nodes)))


class RlModel(LikelihoodModel):
	name = "rl"

	def __init__(self, trajectory: RlTrajectory, activation: Activation = Activation.TANH, depth: int = 3,
			output_dim: int = 1, nodes: int = constants.GH_NODES):
		if output_dim != 1:
			raise ConfigurationError("the RL likelihood needs a scalar value network (output_dim == 1)")
		super().__init__(activation, depth, trajectory.input_dim, 1)
		self.trajectory = trajectory
		self.nodes = nodes
		T, M = trajectory.size, trajectory.n_actions
		self._successors = trajectory.transition.successors(trajectory.states).reshape(T * M, -1)

	def action_values(self, shape, params) -> np.ndarray:
		"""
		(P, T, M) values of every successor state
		"""
		params = np.atleast_2d(params)
		T, M = self.trajectory.size, self.trajectory.n_actions
		v = forward_batch(shape, params, self.activation, self._successors)[:, :, 0]
		return v.reshape(params.shape[0], T, M)

	def log_lik_batch(self, shape, params):
		self._check(shape)
		params = np.atleast_2d(params)
		out = np.empty(params.shape[0])
		for start in range(0, params.shape[0], _RL_CHUNK):
			v = self.action_values(shape, params[start:start + _RL_CHUNK])
			a = np.broadcast_to(self.trajectory.actions, v.shape[:2])
			out[start:start + _RL_CHUNK] = log_action_prob(v, a, self.trajectory.sigma, self.nodes).sum(axis=1)
		return out


def log_lik_regression(theta: ThetaLevel, act: Activation, data: RegressionData) -> float:
	return RegressionModel(data, act, theta.shape.depth).log_lik(theta)


def log_lik_classification(theta: ThetaLevel, act: Activation, data: ClassificationData) -> float:
	return ClassificationModel(data, act, theta.shape.depth).log_lik(theta)


def log_lik_rl(theta: ThetaLevel, act: Activation, traj: RlTrajectory) -> float:
	return RlModel(traj, act, theta.shape.depth, theta.shape.output_dim).log_lik(theta)
