"""Counter-based random streams.

A stream is the pair (seed, stream_id); the pair keys a Philox generator, so the same pair
gives the same sequence on every platform and distinct pairs give independent sequences.
Child streams are derived by hashing labels, which keeps per-level / per-replication
randomness reproducible regardless of scheduling order.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
	seed: int
	stream_id: int = 0

	def __post_init__(self):
		object.__setattr__(self, "seed", int(self.seed) & _MASK64)
		object.__setattr__(self, "stream_id", int(self.stream_id) & _MASK64)

	def generator(self) -> np.random.Generator:
		"""
		Fresh generator positioned at the start of this stream
		"""
		key = (self.stream_id << 64) | self.seed
		return np.random.Generator(np.random.Philox(key=key))

	def child(self, *labels) -> "RngStream":
		"""
		Derive an independent stream named by labels (ints or strings)
		"""
		text = "|".join([str(self.seed), str(self.stream_id), *map(str, labels)])
		digest = hashlib.sha256(text.encode("utf-8")).digest()
		return RngStream(self.seed, int.from_bytes(digest[:8], "little"))

	def seed_block(self, count: int) -> list["RngStream"]:
		"""
		Disjoint streams for a pool of workers (replications)
		"""
		return [self.child("block", i) for i in range(count)]
