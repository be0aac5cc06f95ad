"""Micro-benchmarks of the four discrete samplers.

Each sampler is timed on three operations: building its structure from a
weight vector, drawing a sample, and absorbing a single-weight change.  For
LSearch an update only adjusts the running total; BSearch and the alias
table must rebuild; the F+tree walks one leaf-to-root path.

Weights follow a heavy-tailed Pareto law to mimic skewed topic counts.
Every figure is the median over ``trials`` after one untimed warm-up pass.
"""
from __future__ import annotations

import statistics
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence

import numpy as np

from .samplers import AliasTable, FTree, cumsum_build, lsearch_sample

SAMPLERS = ("lsearch", "bsearch", "alias", "ftree")


@dataclass
class BenchRecord:
    sampler: str
    topics: int
    ns_per_build: float
    ns_per_sample: float
    ns_per_update: float
    ns_per_step: float


def power_law_weights(n: int, rng: np.random.Generator) -> List[float]:
    return (rng.pareto(1.5, size=n) + 1e-3).tolist()


def _ns_per_op(fn: Callable[[], None], reps: int) -> float:
    t0 = time.perf_counter_ns()
    fn()
    return (time.perf_counter_ns() - t0) / reps


def _ops(name: str, w: List[float], us: List[float], upd: List[tuple], builds: int):
    """Closures timing build / sample / update for one sampler."""
    T = len(w)
    if name == "lsearch":
        state = {"w": list(w), "total": sum(w)}

        def build():
            for _ in range(builds):
                s = 0.0
                for x in w:
                    s += x

        def sample():
            ww, total = state["w"], state["total"]
            for u in us:
                lsearch_sample(ww, u * total)

        def update():
            ww = state["w"]
            for t, d in upd:
                ww[t] += d
                state["total"] += d
    elif name == "bsearch":
        cdf = cumsum_build(w)

        def build():
            for _ in range(builds):
                cumsum_build(w)

        def sample():
            total = cdf.total
            for u in us:
                cdf.sample(u * total)

        def update():
            ww = list(w)
            for t, d in upd:
                ww[t] += d
                cumsum_build(ww)
    elif name == "alias":
        table = AliasTable.build(w)

        def build():
            for _ in range(builds):
                AliasTable.build(w)

        def sample():
            for u in us:
                table.sample(u * T)

        def update():
            ww = list(w)
            for t, d in upd:
                ww[t] += d
                AliasTable.build(ww)
    elif name == "ftree":
        tree = FTree(w)

        def build():
            for _ in range(builds):
                FTree(w)

        def sample():
            total = tree.total
            for u in us:
                tree.sample(u * total)

        def update():
            for t, d in upd:
                tree.update(t, d)
    else:
        raise ValueError(f"unknown sampler {name!r}")
    return build, sample, update


def bench_samplers(sizes: Sequence[int], trials: int = 5, samples: int = 2000,
                   updates_per_sample: float = 1.0, seed: int = 0,
                   samplers: Sequence[str] = SAMPLERS) -> List[BenchRecord]:
    """Time every sampler at every size.

    ``ns_per_step`` is ``ns_per_sample + updates_per_sample * ns_per_update``,
    the cost of one Gibbs-like step that draws once and then changes that
    many weights.
    """
    rng = np.random.default_rng(seed)
    out = []
    for T in sizes:
        w = power_law_weights(T, rng)
        us = rng.random(samples).tolist()
        # Θ(T) rebuilds are costly; time fewer of them at large T
        n_rebuild = max(10, min(samples, 200_000 // T))
        builds = n_rebuild
        for name in samplers:
            n_upd = n_rebuild if name in ("bsearch", "alias") else samples
            ts = rng.integers(0, T, size=n_upd).tolist()
            upd = [(t, 1e-3) for t in ts]
            build, sample, update = _ops(name, w, us, upd, builds)
            timings: Dict[str, List[float]] = {"build": [], "sample": [], "update": []}
            for trial in range(trials + 1):
                b = _ns_per_op(build, builds)
                s = _ns_per_op(sample, samples)
                u = _ns_per_op(update, n_upd)
                if trial:  # first pass is warm-up
                    timings["build"].append(b)
                    timings["sample"].append(s)
                    timings["update"].append(u)
            med = {k: statistics.median(v) for k, v in timings.items()}
            out.append(BenchRecord(name, T, med["build"], med["sample"], med["update"],
                                   med["sample"] + updates_per_sample * med["update"]))
    return out
