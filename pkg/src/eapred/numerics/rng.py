"""Seeded random streams.

All randomness in the package goes through :class:`RngStream`.  A stream is
identified by a 64-bit seed, an algorithm name and a path of substream labels,
so a top-level seed can be fanned out into independent named streams
(``datagen``, ``init``, ``shuffle``, ``dropout``) that stay reproducible when
only part of a pipeline is re-run.
"""

from __future__ import annotations

import hashlib

import numpy as np

from eapred.errors import ConfigError

_BIT_GENERATORS = {
    "philox": np.random.Philox,
    "pcg64": np.random.PCG64,
}


def _label_key(label):
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class RngStream:
    def __init__(self, seed, algorithm="philox", path=()):
        if not 0 <= int(seed) < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}")
        if algorithm not in _BIT_GENERATORS:
            raise ConfigError(f"unknown rng algorithm {algorithm!r}; choose from {sorted(_BIT_GENERATORS)}")
        self.seed = int(seed)
        self.algorithm = algorithm
        self.path = tuple(path)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=tuple(_label_key(p) for p in self.path))
        self._gen = np.random.Generator(_BIT_GENERATORS[algorithm](seq))

    def substream(self, *labels):
        """Independent child stream; does not advance this stream."""
        return RngStream(self.seed, self.algorithm, self.path + tuple(labels))

    @property
    def generator(self):
        return self._gen

    def uniform(self, shape=None, low=0.0, high=1.0):
        return self._gen.uniform(low, high, size=shape)

    def normal(self, shape=None, loc=0.0, scale=1.0):
        return self._gen.normal(loc, scale, size=shape)

    def integers(self, low, high=None, shape=None):
        return self._gen.integers(low, high, size=shape)

    def permutation(self, n):
        return self._gen.permutation(n)

    def get_state(self):
        return {
            "seed": self.seed,
            "algorithm": self.algorithm,
            "path": [str(p) for p in self.path],
            "bit_generator": _jsonable(self._gen.bit_generator.state),
        }

    @classmethod
    def from_state(cls, state):
        stream = cls(state["seed"], state["algorithm"], tuple(state["path"]))
        stream._gen.bit_generator.state = _from_jsonable(state["bit_generator"])
        return stream

    def __repr__(self):
        return f"RngStream(seed={self.seed}, algorithm={self.algorithm!r}, path={self.path!r})"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": obj.tolist(), "dtype": str(obj.dtype)}
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _from_jsonable(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            return np.array(obj["__ndarray__"], dtype=obj["dtype"])
        return {k: _from_jsonable(v) for k, v in obj.items()}
    return obj
