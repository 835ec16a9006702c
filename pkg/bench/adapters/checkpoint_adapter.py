"""Population checkpoints in the MLBN binary container.

Layout (little-endian):
- magic b"MLBN", u16 format version, u16 flags (bit 0: log-likelihoods, bit 1: ancestors, bit 2: tempered path)
- i64 level, depth, input_dim, output_dim, particle count P, parameter count d
- f64 cost, acceptance (NaN when absent)
- f64 particles (P * d, row-major), f64 log-weights (P), [f64 log-likelihoods (P)], [i64 ancestors (P)]
- tempered path: i64 K, R, evaluated (0/1), n, input columns, output columns; f64 temperatures (K),
  rhos (R), then when evaluated inputs (n * input columns), increment and second moment (n * output columns each)

Files are written to a temporary name and renamed, so a crash never leaves a partial population.
"""

import logging
import os
import struct
from pathlib import Path

import numpy as np

from core.constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from core.exceptions import DomainError
from core.nn import NetworkShape
from core.smc import ParticlePopulation, TemperedPath

logger = logging.getLogger(__name__)

_HEADER = struct.Struct("<4sHH6q2d")
_PATH_HEADER = struct.Struct("<6q")
_HAS_LOG_LIK = 1
_HAS_ANCESTORS = 2
_HAS_PATH = 4


def _encode_path(path: TemperedPath) -> list[bytes]:
	evaluated = path.increment is not None and path.inputs is not None
	n, n_in = path.inputs.shape if evaluated else (0, 0)
	n_out = path.increment.size // max(n, 1) if evaluated else 0
	parts = [
		_PATH_HEADER.pack(len(path.temperatures), len(path.rhos), int(evaluated), n, n_in, n_out),
		np.asarray(path.temperatures).astype("<f8").tobytes(),
		np.asarray(path.rhos).astype("<f8").tobytes(),
	]
	if evaluated:
		for arr in (path.inputs, path.increment, path.second):
			parts.append(np.asarray(arr).astype("<f8").tobytes())
	return parts


class CheckpointAdapter:
	"""
	encode/decode populations; save/load them as population_<index>.mlbn under a directory
	"""
	@staticmethod
	def encode(population: ParticlePopulation) -> bytes:
		shape = population.shape
		flags = (_HAS_LOG_LIK if population.log_lik is not None else 0) | \
			(_HAS_ANCESTORS if population.ancestors is not None else 0) | \
			(_HAS_PATH if population.path is not None else 0)
		acceptance = np.nan if population.acceptance is None else population.acceptance
		parts = [
			_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, flags, population.level, shape.depth,
				shape.input_dim, shape.output_dim, population.size, shape.param_count, population.cost, acceptance),
			population.particles.astype("<f8").tobytes(),
			population.log_weights.astype("<f8").tobytes(),
		]
		if population.log_lik is not None:
			parts.append(np.asarray(population.log_lik).astype("<f8").tobytes())
		if population.ancestors is not None:
			parts.append(np.asarray(population.ancestors).astype("<i8").tobytes())
		if population.path is not None:
			parts.extend(_encode_path(population.path))
		return b"".join(parts)

	@staticmethod
	def decode(blob: bytes) -> ParticlePopulation:
		if len(blob) < _HEADER.size:
			raise DomainError("checkpoint is truncated")
		magic, version, flags, level, depth, n_in, n_out, P, d, cost, acceptance = _HEADER.unpack_from(blob)
		if magic != CHECKPOINT_MAGIC:
			raise DomainError(f"not an MLBN checkpoint (magic {magic!r})")
		if version != CHECKPOINT_VERSION:
			raise DomainError(f"unsupported checkpoint version {version}")
		shape = NetworkShape(depth, n_in, n_out, level)
		if shape.param_count != d:
			raise DomainError("checkpoint parameter count does not match its network shape")
		expected = _HEADER.size + 8 * (P * d + P + (P if flags & _HAS_LOG_LIK else 0) + (P if flags & _HAS_ANCESTORS else 0))
		path_header = None
		if flags & _HAS_PATH:
			if len(blob) < expected + _PATH_HEADER.size:
				raise DomainError("checkpoint is truncated")
			path_header = _PATH_HEADER.unpack_from(blob, expected)
			K, R, evaluated, rows, cols_in, cols_out = path_header
			expected += _PATH_HEADER.size + 8 * (K + R + (rows * (cols_in + 2 * cols_out) if evaluated else 0))
		if len(blob) != expected:
			raise DomainError(f"checkpoint size {len(blob)} != expected {expected}")

		offset = _HEADER.size

		def take(count, dtype):
			nonlocal offset
			arr = np.frombuffer(blob, dtype=dtype, count=count, offset=offset).astype(dtype[1:])
			offset += 8 * count
			return arr

		particles = take(P * d, "<f8").reshape(P, d)
		log_weights = take(P, "<f8")
		log_lik = take(P, "<f8") if flags & _HAS_LOG_LIK else None
		ancestors = take(P, "<i8") if flags & _HAS_ANCESTORS else None
		path = None
		if path_header is not None:
			offset += _PATH_HEADER.size
			K, R, evaluated, rows, cols_in, cols_out = path_header
			temperatures = tuple(float(t) for t in take(K, "<f8"))
			rhos = tuple(float(r) for r in take(R, "<f8"))
			if evaluated:
				inputs = take(rows * cols_in, "<f8").reshape(rows, cols_in)
				increment = take(rows * cols_out, "<f8").reshape(rows, cols_out)
				second = take(rows * cols_out, "<f8").reshape(rows, cols_out)
				path = TemperedPath(temperatures, rhos, inputs, increment, second)
			else:
				path = TemperedPath(temperatures, rhos)
		return ParticlePopulation(
			level=level,
			shape=shape,
			particles=particles,
			log_weights=log_weights,
			log_lik=log_lik,
			ancestors=ancestors,
			acceptance=None if np.isnan(acceptance) else float(acceptance),
			cost=float(cost),
			path=path,
		)

	@staticmethod
	def path_for(directory, index: int) -> Path:
		return Path(directory) / f"population_{index:02d}.mlbn"

	@staticmethod
	def save(population: ParticlePopulation, directory, index: int) -> Path:
		path = CheckpointAdapter.path_for(directory, index)
		tmp = path.with_suffix(".tmp")
		try:
			path.parent.mkdir(parents=True, exist_ok=True)
			tmp.write_bytes(CheckpointAdapter.encode(population))
			os.replace(tmp, path)
		except OSError as e:
			raise OSError(f"cannot write checkpoint {path}: {e}") from e
		logger.debug("checkpoint written %s", path)
		return path

	@staticmethod
	def load_all(directory) -> list[ParticlePopulation]:
		"""
		Leading run of complete populations (0, 1, ...) found in directory
		"""
		out = []
		while True:
			path = CheckpointAdapter.path_for(directory, len(out))
			if not path.exists():
				return out
			try:
				out.append(CheckpointAdapter.decode(path.read_bytes()))
			except OSError as e:
				raise OSError(f"cannot read checkpoint {path}: {e}") from e
