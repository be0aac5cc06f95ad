import numpy as np
import pytest

from nomadlda.bench import SAMPLERS, bench_samplers, power_law_weights


def test_schema():
    recs = bench_samplers([4, 16], trials=2, samples=30, updates_per_sample=0.5, seed=1)
    assert [(r.sampler, r.topics) for r in recs] == [(s, t) for t in (4, 16) for s in SAMPLERS]
    for r in recs:
        assert r.ns_per_build > 0 and r.ns_per_sample > 0 and r.ns_per_update > 0
        assert r.ns_per_step == pytest.approx(r.ns_per_sample + 0.5 * r.ns_per_update)


def test_subset():
    recs = bench_samplers([8], trials=1, samples=10, samplers=["ftree"])
    assert [r.sampler for r in recs] == ["ftree"]


def test_unknown_sampler():
    with pytest.raises(ValueError):
        bench_samplers([8], trials=1, samples=10, samplers=["heap"])


def test_weights_are_positive_and_skewed():
    w = np.asarray(power_law_weights(10000, np.random.default_rng(0)))
    assert (w > 0).all()
    # heavy tail: the top 1% carries far more than 1% of the mass
    top = np.sort(w)[-100:].sum() / w.sum()
    assert top > 0.1
