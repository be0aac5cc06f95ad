"""Seedable, splittable uniform streams.

Every sampler in the package consumes randomness only as uniform numbers
drawn from a :class:`UniformStream`.  Streams are derived from one integer
seed through :class:`numpy.random.SeedSequence`, so stream ``k`` of a seed is
the same whether 1 or 64 streams are spawned.
"""
from __future__ import annotations

from typing import List

import numpy as np

BLOCK = 4096


class UniformStream:
    """Buffered source of uniform floats on ``[0, 1)``.

    Numbers are generated by PCG64 in blocks of ``BLOCK``; :meth:`random`
    hands them out one at a time, which is much cheaper than a scalar call
    into numpy per draw.
    """

    __slots__ = ("_gen", "_buf", "_pos", "_block_state")

    def __init__(self, seed_seq: np.random.SeedSequence):
        self._gen = np.random.Generator(np.random.PCG64(seed_seq))
        self._refill()

    def _refill(self) -> None:
        self._block_state = self._gen.bit_generator.state
        self._buf = self._gen.random(BLOCK).tolist()
        self._pos = 0

    def random(self) -> float:
        i = self._pos
        if i == BLOCK:
            self._refill()
            i = 0
        self._pos = i + 1
        return self._buf[i]

    def integers(self, n: int) -> int:
        """Uniform integer on ``[0, n)``."""
        return min(int(self.random() * n), n - 1)

    @property
    def state(self) -> dict:
        """JSON-serializable position of the stream."""
        return {"bit_generator": self._block_state, "pos": self._pos}

    @state.setter
    def state(self, value: dict) -> None:
        self._gen.bit_generator.state = value["bit_generator"]
        self._refill()
        self._pos = int(value["pos"])


def spawn_streams(seed: int, n: int, purpose: int = 0) -> List[UniformStream]:
    """``n`` independent streams for ``seed``.

    ``purpose`` separates families of streams (sampling vs. routing) so that
    adding a consumer in one family never shifts the numbers of another.
    """
    root = np.random.SeedSequence(entropy=seed, spawn_key=(purpose,))
    return [UniformStream(child) for child in root.spawn(n)]


def init_generator(seed: int) -> np.random.Generator:
    """Generator used for one-off draws such as initial assignments."""
    return np.random.default_rng(seed)
