"""Samplers for a discrete distribution given by unnormalized weights.

Four structures are provided, each drawing an outcome from a caller-supplied
uniform number ``u`` rather than an internal generator:

* :func:`lsearch_sample` -- linear scan, no auxiliary storage.
* :class:`Cdf` -- inclusive prefix sums searched by bisection.
* :class:`AliasTable` -- Walker's alias table built with Vose's worklists.
* :class:`FTree` -- a complete binary tree of partial sums supporting
  logarithmic sampling *and* logarithmic single-weight updates.

Outcomes are 0-based indices throughout.  The exact samplers (linear,
bisection and tree) agree on every ``u``: each returns the smallest ``t`` whose
inclusive prefix sum exceeds ``u``.

All structures hold plain Python lists.  Element access on lists is several
times cheaper than scalar indexing into numpy arrays, and these structures
sit in the innermost loop of every Gibbs sweep.
"""
from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

from .errors import ContractError, InvalidDistributionError

__all__ = [
    "lsearch_sample",
    "Cdf",
    "cumsum_build",
    "bsearch_sample",
    "AliasTable",
    "alias_build",
    "alias_sample",
    "FTree",
    "ftree_build",
    "next_pow2",
]

# leaves more negative than this fraction of the total are a caller bug
NEGATIVE_LEAF_TOL = 1e-12


def lsearch_sample(weights: Sequence[float], u: float) -> int:
    """Return ``min{t : w[0] + ... + w[t] > u}`` by a linear scan."""
    if u < 0.0:
        raise ContractError(f"u={u!r} is negative")
    s = 0.0
    for t, x in enumerate(weights):
        s += x
        if s > u:
            return t
    if s <= 0.0:
        raise InvalidDistributionError("weights carry no mass")
    raise ContractError(f"u={u!r} is not below the total mass {s!r}")


@dataclass
class Cdf:
    """Inclusive prefix sums, optionally over a sparse support.

    Attributes
    ----------
    c
        Non-decreasing prefix sums; ``c[-1]`` is the total mass.
    index
        Outcome label of each slot when built over a sparse support, else None.
    """

    c: List[float]
    index: Optional[List[int]] = None

    @property
    def total(self) -> float:
        return self.c[-1] if self.c else 0.0

    def sample(self, u: float) -> int:
        c = self.c
        if not c or not 0.0 <= u < c[-1]:
            raise ContractError(f"u={u!r} outside [0, {self.total!r})")
        k = bisect.bisect_right(c, u)
        return self.index[k] if self.index is not None else k


def cumsum_build(weights: Sequence[float], support: Optional[Sequence[int]] = None) -> Cdf:
    """Build prefix sums of ``weights``.

    When ``support`` is given, ``weights[k]`` is the mass of outcome
    ``support[k]`` and every other outcome has zero mass.
    """
    c = list(itertools.accumulate(weights))
    if any(x < 0.0 for x in weights):
        raise InvalidDistributionError("negative weight")
    if support is None:
        return Cdf(c)
    if len(support) != len(c):
        raise ContractError("support and weights differ in length")
    return Cdf(c, list(support))


def bsearch_sample(cdf: Cdf, u: float) -> int:
    return cdf.sample(u)


@dataclass
class AliasTable:
    """Equal-mass buckets with one alias outcome each.

    Bucket ``j`` keeps outcome ``j`` with probability ``prob[j]`` and hands the
    rest of its mass to ``alias[j]``.
    """

    prob: List[float]
    alias: List[int]
    total: float

    @classmethod
    def build(cls, weights: Sequence[float]) -> "AliasTable":
        n = len(weights)
        total = 0.0
        for x in weights:
            if x < 0.0:
                raise InvalidDistributionError("negative weight")
            total += x
        if n == 0 or not total > 0.0 or math.isinf(total):
            raise InvalidDistributionError("weights carry no finite mass")
        scale = n / total
        scaled = [x * scale for x in weights]
        prob = [1.0] * n
        alias = list(range(n))
        small = [j for j in range(n) if scaled[j] < 1.0]
        large = [j for j in range(n) if scaled[j] >= 1.0]
        while small and large:
            lo = small.pop()
            hi = large.pop()
            prob[lo] = scaled[lo]
            alias[lo] = hi
            scaled[hi] = (scaled[hi] + scaled[lo]) - 1.0
            if scaled[hi] < 1.0:
                small.append(hi)
            else:
                large.append(hi)
        # leftovers are within rounding of 1 and keep their whole bucket
        return cls(prob, alias, total)

    def __len__(self) -> int:
        return len(self.prob)

    def sample(self, u: float) -> int:
        """Outcome for ``u`` uniform on ``[0, T)``."""
        n = len(self.prob)
        if not 0.0 <= u < n:
            raise ContractError(f"u={u!r} outside [0, {n})")
        j = int(u)
        # strict so that an empty bucket never returns its own outcome
        if u - j < self.prob[j]:
            return j
        return self.alias[j]

    def masses(self) -> List[float]:
        """Mass each outcome receives, reconstructed from the buckets."""
        n = len(self.prob)
        out = list(self.prob)
        for j in range(n):
            out[self.alias[j]] += 1.0 - self.prob[j]
        unit = self.total / n
        return [m * unit for m in out]


def alias_build(weights: Sequence[float]) -> AliasTable:
    return AliasTable.build(weights)


def alias_sample(table: AliasTable, u: float) -> int:
    return table.sample(u)


def next_pow2(n: int) -> int:
    return 1 if n <= 1 else 1 << (n - 1).bit_length()


class FTree:
    """Complete binary tree of partial sums over ``size`` weights.

    ``F[1]`` is the root and holds the total mass; node ``i`` has children
    ``2i`` and ``2i + 1``.  Outcome ``t`` lives at leaf ``base + t`` where
    ``base`` is ``size`` rounded up to a power of two.  Leaves past ``size``
    are padding and hold exactly zero.
    """

    __slots__ = ("size", "base", "F")

    def __init__(self, weights: Sequence[float]):
        size = len(weights)
        if size == 0:
            raise InvalidDistributionError("empty weight vector")
        self.size = size
        self.base = next_pow2(size)
        self.F = [0.0] * (2 * self.base)
        self.assign(weights)

    @classmethod
    def build(cls, weights: Sequence[float]) -> "FTree":
        return cls(weights)

    def assign(self, weights: Sequence[float]) -> None:
        """Overwrite every leaf and rebuild the internal nodes in Θ(T)."""
        if len(weights) != self.size:
            raise ContractError("weight vector has the wrong length")
        base = self.base
        F = self.F
        for t, x in enumerate(weights):
            if x < 0.0:
                raise InvalidDistributionError(f"negative weight at {t}")
            F[base + t] = float(x)
        for i in range(base - 1, 0, -1):
            F[i] = F[2 * i] + F[2 * i + 1]

    def rebuild(self) -> None:
        """Recompute internal nodes from the leaves, discarding drift."""
        F = self.F
        for i in range(self.base - 1, 0, -1):
            F[i] = F[2 * i] + F[2 * i + 1]

    @property
    def total(self) -> float:
        return self.F[1]

    def leaf(self, t: int) -> float:
        return self.F[self.base + t]

    def leaves(self) -> List[float]:
        return self.F[self.base:self.base + self.size]

    def sample(self, u: float) -> int:
        """Smallest ``t`` whose prefix sum exceeds ``u``, in Θ(log T)."""
        F = self.F
        if not 0.0 <= u < F[1]:
            raise ContractError(f"u={u!r} outside [0, {F[1]!r})")
        return self.descend(u)

    def descend(self, u: float) -> int:
        # Unchecked descent.  A right child with zero mass is never entered,
        # so padding and zero leaves stay unreachable even when rounding puts
        # u at or past the mass of the current subtree.
        F = self.F
        base = self.base
        i = 1
        while i < base:
            i <<= 1
            left = F[i]
            if u >= left and F[i + 1] > 0.0:
                u -= left
                i += 1
        return i - base

    def update(self, t: int, delta: float) -> None:
        """Add ``delta`` to weight ``t`` and all its ancestors."""
        if not 0 <= t < self.size:
            raise ContractError(f"topic {t} outside [0, {self.size})")
        F = self.F
        i = self.base + t
        new = F[i] + delta
        if new < 0.0:
            if new < -NEGATIVE_LEAF_TOL * max(F[1], 1.0):
                raise ContractError(f"update drives leaf {t} to {new!r}")
            delta = -F[i]
        while i:
            F[i] += delta
            i >>= 1

    def set(self, t: int, value: float) -> None:
        """Leaf-anchored update: move weight ``t`` to ``value``."""
        self.update(t, value - self.F[self.base + t])

    def check(self, tol: float = 1e-9) -> bool:
        """True when every internal node equals the sum of its children."""
        F = self.F
        bound = tol * max(F[1], 1.0)
        return all(abs(F[i] - F[2 * i] - F[2 * i + 1]) <= bound
                   for i in range(1, self.base))

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        return f"FTree(size={self.size}, total={self.F[1]!r})"


def ftree_build(weights: Sequence[float]) -> FTree:
    return FTree(weights)
