"""Experiment configuration: a flat JSON document, every field defaulted, unknown fields rejected.


- task: rate | regression | classification | rl
- levels: [lo, hi] finest levels swept by `bench` (desk scale 3..6, full scale 3..7)
- budget per L: budget_base * budget_growth^(L - levels[0]) parameter touches
- full_scale: switches the grid to L 3..7, 100 replications and the alpha sweep 1.7, 1.9, 2, 3 plus the
  sub-canonical 1.1, 1.4 (fields left at their defaults only)
- pcn_adapt / bridge_ess: acceptance-controlled pCN and tempered bridging of collapsing reweightings
"""

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from core import constants
from core.exceptions import ConfigurationError
from core.nn import Activation
from core.smc import MULTINOMIAL, SYSTEMATIC, MutationConfig

TASKS = ("rate", "regression", "classification", "rl")
SAMPLERS = ("smc", "mlsmc", "both")

# Grid used when full_scale is set.
FULL_SCALE_LEVELS = (3, 7)
FULL_SCALE_REPLICATIONS = 100
FULL_SCALE_ALPHAS = (1.7, 1.9, 2.0, 3.0)
SUB_CANONICAL_ALPHAS = (1.1, 1.4)


@dataclass(frozen=True)
class ExperimentConfig:
	task: str = "regression"
	alpha: float = 2.0
	levels: tuple[int, int] = (3, 6)
	replications: int = 20
	budget_base: float = 2.0e5
	budget_growth: float = 4.0
	samplers: str = "both"
	activation: str = Activation.TANH.value
	depth: int = 3
	seed: int = 0
	n_test: int = 32
	data_size: int | None = None
	gamma: float = 2.0
	beta: float | None = None
	reference_level: int = constants.REFERENCE_LEVEL
	reference_factor: float = 16.0
	pcn_rho: float = constants.PCN_RHO
	n_steps: int = constants.PCN_STEPS
	min_samples: int = constants.MIN_SAMPLES
	resampling: str = MULTINOMIAL
	rate_samples: int = 100_000
	rate_levels: tuple[int, int] = (3, 9)
	rate_alphas: tuple[float, ...] = field(default_factory=tuple)
	full_scale: bool = False
	pcn_adapt: bool = constants.PCN_ADAPT
	bridge_ess: float | None = constants.BRIDGE_ESS_FRACTION

	def __post_init__(self):
		object.__setattr__(self, "levels", tuple(int(v) for v in self.levels))
		object.__setattr__(self, "rate_levels", tuple(int(v) for v in self.rate_levels))
		object.__setattr__(self, "rate_alphas", tuple(float(v) for v in self.rate_alphas))
		if self.full_scale and self.levels == (3, 6):
			object.__setattr__(self, "levels", FULL_SCALE_LEVELS)
		if self.full_scale and self.replications == 20:
			object.__setattr__(self, "replications", FULL_SCALE_REPLICATIONS)
		self.validate()

	def validate(self):
		if self.task not in TASKS:
			raise ConfigurationError(f"task must be one of {TASKS}, got {self.task!r}")
		if self.samplers not in SAMPLERS:
			raise ConfigurationError(f"samplers must be one of {SAMPLERS}, got {self.samplers!r}")
		if self.activation not in {a.value for a in Activation}:
			raise ConfigurationError(f"unknown activation {self.activation!r}")
		if self.resampling not in (MULTINOMIAL, SYSTEMATIC):
			raise ConfigurationError(f"unknown resampling scheme {self.resampling!r}")
		if self.replications < 1:
			raise ConfigurationError("replications must be >= 1")
		if len(self.levels) != 2 or not 2 <= self.levels[0] <= self.levels[1] <= 9:
			raise ConfigurationError(f"levels must satisfy 2 <= lo <= hi <= 9, got {self.levels}")
		if len(self.rate_levels) != 2 or not 1 <= self.rate_levels[0] < self.rate_levels[1]:
			raise ConfigurationError(f"rate_levels must satisfy 1 <= lo < hi, got {self.rate_levels}")
		if self.alpha <= 0.5:
			raise ConfigurationError("alpha must exceed 1/2")
		if self.budget_base <= 0 or self.budget_growth <= 0:
			raise ConfigurationError("budget_base and budget_growth must be positive")
		if self.task != "rate" and (self.reference_factor < 1 or self.reference_level < self.levels[1]):
			raise ConfigurationError("reference must be at least as fine and as expensive as the sweep")
		if self.n_test < 1 or self.depth < 2:
			raise ConfigurationError("n_test must be >= 1 and depth >= 2")
		if self.n_steps < 1 or self.min_samples < 1:
			raise ConfigurationError("n_steps and min_samples must be >= 1")
		if self.rate_samples < 1000:
			raise ConfigurationError("rate_samples must be >= 1000")
		if self.bridge_ess is not None and not 0.0 < self.bridge_ess < 1.0:
			raise ConfigurationError("bridge_ess must lie in (0, 1) or be null")
		# raises ConfigurationError itself
		self.mutation

	@property
	def mutation(self) -> MutationConfig:
		return MutationConfig(self.n_steps, self.pcn_rho, adapt=self.pcn_adapt)

	@property
	def act(self) -> Activation:
		return Activation(self.activation)

	@property
	def level_range(self) -> range:
		return range(self.levels[0], self.levels[1] + 1)

	@property
	def allocation_beta(self) -> float:
		"""
		Strong-rate exponent fed to the sample allocation, 2*alpha - 1 unless set
		"""
		return self.beta if self.beta is not None else 2.0 * self.alpha - 1.0

	@property
	def alpha_grid(self) -> tuple[float, ...]:
		"""
		Alphas swept by one command: the full-scale grid (canonical, then sub-canonical) or just alpha
		"""
		if self.full_scale and self.alpha == 2.0:
			return FULL_SCALE_ALPHAS + SUB_CANONICAL_ALPHAS
		return (self.alpha,)

	def budget(self, L: int) -> float:
		return self.budget_base * self.budget_growth ** (L - self.levels[0])

	@property
	def sampler_list(self) -> tuple[str, ...]:
		return ("smc", "mlsmc") if self.samplers == "both" else (self.samplers,)

	def with_overrides(self, **kwargs) -> "ExperimentConfig":
		return replace(self, **{k: v for k, v in kwargs.items() if v is not None})

	def to_dict(self) -> dict:
		out = asdict(self)
		for key in ("levels", "rate_levels", "rate_alphas"):
			out[key] = list(out[key])
		return out

	@classmethod
	def from_dict(cls, data: dict) -> "ExperimentConfig":
		known = {f.name for f in fields(cls)}
		unknown = sorted(set(data) - known)
		if unknown:
			raise ConfigurationError(f"unknown config fields: {', '.join(unknown)}")
		try:
			return cls(**data)
		except (TypeError, ValueError) as e:
			raise ConfigurationError(str(e)) from e


def load_config(path) -> ExperimentConfig:
	if path is None:
		return ExperimentConfig()
	path = Path(path)
	try:
		data = json.loads(path.read_text())
	except OSError as e:
		raise ConfigurationError(f"cannot read config {path}: {e}") from e
	except json.JSONDecodeError as e:
		raise ConfigurationError(f"config {path} is not valid JSON: {e}") from e
	if not isinstance(data, dict):
		raise ConfigurationError(f"config {path} must be a JSON object")
	return ExperimentConfig.from_dict(data)
