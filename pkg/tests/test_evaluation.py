import numpy as np
import pytest

from nomadlda.evaluation import cosine_matrix, greedy_alignment


def test_cosine_matrix():
    a = np.array([[1.0, 0.0], [1.0, 1.0]])
    sim = cosine_matrix(a, a)
    np.testing.assert_allclose(np.diag(sim), 1.0)
    assert sim[0, 1] == pytest.approx(1 / np.sqrt(2))


def test_recovers_permutation():
    rng = np.random.default_rng(0)
    planted = rng.dirichlet(np.full(30, 0.1), size=5)
    perm = [3, 0, 4, 1, 2]
    pairs, score = greedy_alignment(planted[perm], planted)
    assert score == pytest.approx(1.0)
    assert sorted(pairs) == sorted((i, perm[i]) for i in range(5))


def test_greedy_takes_best_pair_first():
    sim_target = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    est = np.array([[0.9, 0.1, 0.0], [0.8, 0.6, 0.0]])
    pairs, _ = greedy_alignment(est, sim_target)
    assert pairs[0] == (0, 0)
    assert pairs[1] == (1, 1)
