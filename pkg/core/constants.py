"""Numerical defaults shared across the sampler modules.


- PCN_RHO / PCN_STEPS control the prior-preserving mutation kernel.
- PCN_ADAPT / ACCEPT_BAND steer rho toward a target acceptance rate (adaptive samplers only).
- MIN_ESS is the degeneracy guard; MIN_SAMPLES floors the per-level allocation.
- REFERENCE_LEVEL is the resolution of ground-truth runs (n_7 = 128).
- GH_NODES is the Gauss-Hermite rule size of the action-likelihood integral.

Values can be overridden from settings (env-driven); everything is recorded in run outputs.
"""

from django.conf import settings

PCN_RHO = float(getattr(settings, "MLBN_PCN_RHO", 0.98))
PCN_STEPS = int(getattr(settings, "MLBN_PCN_STEPS", 5))
MIN_ESS = float(getattr(settings, "MLBN_MIN_ESS", 5.0))
MIN_SAMPLES = int(getattr(settings, "MLBN_MIN_SAMPLES", 50))
REFERENCE_LEVEL = int(getattr(settings, "MLBN_REFERENCE_LEVEL", 7))
GH_NODES = int(getattr(settings, "MLBN_GH_NODES", 64))
PCN_ADAPT = bool(getattr(settings, "MLBN_PCN_ADAPT", True))
ACCEPT_BAND = (float(getattr(settings, "MLBN_ACCEPT_MIN", 0.2)), float(getattr(settings, "MLBN_ACCEPT_MAX", 0.4)))
# rho adjustment: sqrt(1 - rho^2) is divided or multiplied by ACCEPT_FACTOR, at most ACCEPT_MAX_ITER times per move
ACCEPT_FACTOR = 1.4
ACCEPT_MAX_ITER = 50
BRIDGE_ESS_FRACTION = 0.5

# Gaussian noise of the synthetic datasets.
REGRESSION_NOISE_STD = 0.01
SPIRAL_NOISE_STD = 0.1
RL_SIGMA = 0.01

# Checkpoint container.
CHECKPOINT_MAGIC = b"MLBN"
CHECKPOINT_VERSION = 1


def param_touches(particles: int, steps: int, params: int) -> float:
	"""
	Cost in scalar-parameter-touch units: one particle, one kernel step, every parameter once
	"""
	return float(particles) * float(steps) * float(params)
