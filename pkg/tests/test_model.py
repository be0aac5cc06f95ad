import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import conditional_oracle, dense_counts, interval_measure
from nomadlda.corpus import Corpus
from nomadlda.errors import ConsistencyError, ContractError
from nomadlda.model import (DOC_ORDER, WORD_ORDER, CountModel, HyperParams, conditional_weights,
                            decompose, init_assignments, joint_log_likelihood, two_level_sample)
from nomadlda.samplers import FTree, cumsum_build


def dense_loglik(corpus, z, hyper):
    """Joint log-likelihood straight from the Dirichlet-multinomial formula,
    looping over every (document, topic) and (topic, word) cell."""
    T, J, a, b = hyper.num_topics, hyper.vocab_size, hyper.alpha, hyper.beta
    ndt, nwt, nt = dense_counts(corpus, z, T)
    ll = 0.0
    for d in range(corpus.num_docs):
        ll += math.lgamma(T * a) - T * math.lgamma(a)
        ll += sum(math.lgamma(ndt[d, t] + a) for t in range(T)) - math.lgamma(ndt[d].sum() + T * a)
    for t in range(T):
        ll += math.lgamma(J * b) - J * math.lgamma(b)
        ll += sum(math.lgamma(nwt[w, t] + b) for w in range(J)) - math.lgamma(nt[t] + J * b)
    return ll


class TestHyperParams:
    def test_default(self):
        h = HyperParams.default(1024, 100)
        assert h.alpha == pytest.approx(0.048828125)
        assert h.beta == 0.01
        assert h.beta_bar == pytest.approx(1.0)

    @pytest.mark.parametrize("kw", [dict(num_topics=0, vocab_size=3, alpha=1.0),
                                    dict(num_topics=2, vocab_size=3, alpha=0.0),
                                    dict(num_topics=2, vocab_size=3, alpha=1.0, beta=-1.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            HyperParams(**kw)


class TestCountModel:
    def test_recount_matches_dense(self, small_corpus):
        h = HyperParams(4, small_corpus.vocab_size, 0.5, 0.1)
        z, model = init_assignments(small_corpus, h, seed=3)
        ndt, nwt, nt = dense_counts(small_corpus, z, 4)
        np.testing.assert_array_equal(model.doc_topic_matrix(), ndt)
        np.testing.assert_array_equal(model.word_topic_matrix(), nwt)
        assert model.n_t == nt.astype(int).tolist()
        model.check(small_corpus, z)
        assert model.total_tokens() == small_corpus.num_tokens

    def test_no_zero_entries(self, frozen):
        corpus, hyper, z, model = frozen
        model.remove_token(0, 0, z[0])
        model.add_token(0, 0, z[0])
        model.check(corpus, z)
        assert all(c > 0 for m in model.n_td + model.n_tw for c in m.values())

    def test_remove_underflow(self, frozen):
        corpus, hyper, z, model = frozen
        missing = next(t for t in range(4) if t not in model.n_tw[0])
        with pytest.raises(ConsistencyError):
            model.remove_token(0, 0, missing)

    def test_check_detects_drift(self, frozen):
        corpus, hyper, z, model = frozen
        bad = model.copy()
        bad.n_td[0][z[0]] += 1
        with pytest.raises(ConsistencyError):
            bad.check(corpus, z)
        moved = model.copy()
        moved.remove_token(0, 0, z[0])
        moved.add_token(0, 0, (z[0] + 1) % 4)
        moved.check_invariants()
        with pytest.raises(ConsistencyError):
            moved.check(corpus, z)

    def test_from_assignments_validates(self, frozen):
        corpus, hyper, z, _ = frozen
        with pytest.raises(ConsistencyError):
            CountModel.from_assignments(corpus, z[:-1], hyper)
        with pytest.raises(ConsistencyError):
            CountModel.from_assignments(corpus, [9] * len(z), hyper)

    def test_copy_is_deep(self, frozen):
        _, _, z, model = frozen
        other = model.copy()
        assert other == model
        other.add_token(0, 0, 1)
        assert other != model

    def test_init_is_seeded(self, small_corpus):
        h = HyperParams(4, small_corpus.vocab_size, 0.5)
        z1, m1 = init_assignments(small_corpus, h, 5)
        z2, m2 = init_assignments(small_corpus, h, 5)
        z3, _ = init_assignments(small_corpus, h, 6)
        assert z1 == z2 and m1 == m2
        assert z1 != z3

    def test_init_vocab_mismatch(self, small_corpus):
        with pytest.raises(ContractError):
            init_assignments(small_corpus, HyperParams(4, 3, 0.5), 0)

    def test_topic_word_estimate_rows_sum_to_one(self, frozen):
        _, _, _, model = frozen
        phi = model.topic_word_estimate()
        assert phi.shape == (4, 6)
        np.testing.assert_allclose(phi.sum(axis=1), 1.0)


class TestConditional:
    def test_matches_dense_oracle(self, frozen):
        corpus, hyper, z, model = frozen
        for k in range(corpus.num_tokens):
            d, w = int(corpus.docs[k]), int(corpus.words[k])
            model.remove_token(d, w, z[k])
            p = np.asarray(conditional_weights(model, d, w))
            np.testing.assert_allclose(p / p.sum(), conditional_oracle(corpus, z, hyper, k), rtol=1e-12)
            model.add_token(d, w, z[k])

    @pytest.mark.parametrize("order", [WORD_ORDER, DOC_ORDER])
    def test_decomposition_is_exact(self, frozen, order):
        corpus, hyper, z, model = frozen
        for d in range(3):
            for w in range(6):
                coef, q, r = decompose(model, d, w, order)
                support = model.n_td[d] if order == WORD_ORDER else model.n_tw[w]
                assert set(r) == set(support)
                combined = [coef * q[t] + r.get(t, 0.0) for t in range(4)]
                np.testing.assert_allclose(combined, conditional_weights(model, d, w), rtol=1e-13)

    def test_unknown_order(self, frozen):
        with pytest.raises(ValueError):
            decompose(frozen[3], 0, 0, "sideways")

    @pytest.mark.parametrize("order", [WORD_ORDER, DOC_ORDER])
    def test_two_level_interval_law(self, frozen, order):
        _, _, _, model = frozen
        for d, w in [(0, 1), (1, 4), (2, 5), (0, 3)]:
            coef, q, r = decompose(model, d, w, order)
            tree = FTree(q)
            cdf = cumsum_build(list(r.values()), support=list(r))
            total = coef * tree.total + cdf.total
            mass = interval_measure(lambda u: two_level_sample(coef, tree, cdf, u), total, 4)
            p = np.asarray(conditional_weights(model, d, w))
            np.testing.assert_allclose(mass, p / p.sum(), rtol=1e-9)

    def test_two_level_empty_sparse_part(self):
        tree = FTree([1.0, 3.0])
        cdf = cumsum_build([], support=[])
        assert two_level_sample(2.0, tree, cdf, 0.0) == 0
        assert two_level_sample(2.0, tree, cdf, 7.99) == 1
        with pytest.raises(ContractError):
            two_level_sample(2.0, tree, cdf, 8.0)


class TestLikelihood:
    def test_matches_dense_formula(self, small_corpus):
        for seed in range(3):
            h = HyperParams(4, small_corpus.vocab_size, 0.3 + seed, 0.05)
            z, model = init_assignments(small_corpus, h, seed)
            assert joint_log_likelihood(model) == pytest.approx(dense_loglik(small_corpus, z, h), rel=1e-12)

    def test_empty_documents_contribute_nothing(self, frozen):
        corpus, hyper, z, model = frozen
        docs = [list(corpus.document(i)) for i in range(3)] + [[], []]
        bigger = Corpus.from_documents(docs, vocab_size=6)
        m2 = CountModel.from_assignments(bigger, z, hyper)
        assert joint_log_likelihood(m2) == pytest.approx(joint_log_likelihood(model), abs=1e-12)

    def test_empty_corpus(self):
        h = HyperParams(3, 4, 0.1)
        assert joint_log_likelihood(CountModel(h, 2)) == 0.0

    def test_single_token_closed_form(self):
        corpus = Corpus.from_documents([[1]], vocab_size=3)
        h = HyperParams(2, 3, 0.7, 0.2)
        model = CountModel.from_assignments(corpus, [0], h)
        # p(w, z) = alpha / (T alpha) * beta / (J beta)
        assert joint_log_likelihood(model) == pytest.approx(math.log(0.5 / 3))

    @given(st.lists(st.integers(0, 2), min_size=1, max_size=25), st.integers(0, 1000))
    @settings(max_examples=60, deadline=None)
    def test_property_matches_dense(self, topics, seed):
        rng = np.random.default_rng(seed)
        docs = rng.integers(0, 4, size=len(topics))
        words = rng.integers(0, 5, size=len(topics))
        corpus = Corpus.from_arrays(4, 5, docs, words)
        h = HyperParams(3, 5, 0.25, 0.3)
        # from_arrays reorders by document; assign topics in stored order
        model = CountModel.from_assignments(corpus, topics, h)
        assert joint_log_likelihood(model) == pytest.approx(dense_loglik(corpus, topics, h), rel=1e-11)
