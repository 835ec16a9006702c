"""Error hierarchy shared by the numerical core and the benchmark layer.


- ShapeError: dimensions or levels that do not line up
- DomainError: non-finite inputs, invalid indices, non-positive values
- CouplingError: a fine parameter set does not embed its coarse block
- DegeneracyError: particle weights collapsed (carries the level index)
- ConfigurationError: invalid experiment or sampler configuration
"""

from django.core.exceptions import ValidationError


class MlbnError(Exception):
	"""
	Base class for every error raised by this project
	"""


class ShapeError(MlbnError, ValueError):
	pass


class DomainError(MlbnError, ValueError):
	pass


class CouplingError(MlbnError):
	pass


class DegeneracyError(MlbnError):
	"""
	Raised when weights underflow or the ESS drops below the guard.

	level is the population index at which the collapse happened (None when unknown).
	"""
	def __init__(self, message: str, level: int | None = None):
		super().__init__(message if level is None else f"{message} (level {level})")
		self.level = level


class ConfigurationError(MlbnError, ValidationError):
	"""
	Invalid configuration; a ValidationError so callers can surface e.message cleanly
	"""
	def __init__(self, message: str):
		ValidationError.__init__(self, message)

	def __str__(self):
		return self.message
