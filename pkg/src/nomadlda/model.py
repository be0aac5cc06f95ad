"""Collapsed Gibbs sufficient statistics for LDA with symmetric priors."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.special import gammaln

from .corpus import Corpus
from .errors import ConsistencyError, ContractError
from .rng import init_generator
from .samplers import Cdf, FTree

DOC_ORDER = "doc"
WORD_ORDER = "word"


@dataclass(frozen=True)
class HyperParams:
    """Symmetric Dirichlet priors.  ``beta_bar`` is ``vocab_size * beta``."""

    num_topics: int
    vocab_size: int
    alpha: float
    beta: float = 0.01

    def __post_init__(self):
        if self.num_topics < 1:
            raise ValueError("num_topics must be >= 1")
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")

    @classmethod
    def default(cls, num_topics: int, vocab_size: int) -> "HyperParams":
        """alpha = 50 / T and beta = 0.01."""
        return cls(num_topics, vocab_size, 50.0 / num_topics, 0.01)

    @property
    def beta_bar(self) -> float:
        return self.vocab_size * self.beta


def _dec(counts: Dict[int, int], t: int, what: str) -> None:
    c = counts.get(t, 0)
    if c > 1:
        counts[t] = c - 1
    elif c == 1:
        del counts[t]
    else:
        raise ConsistencyError(f"{what} count for topic {t} is already zero")


def _inc(counts: Dict[int, int], t: int) -> None:
    counts[t] = counts.get(t, 0) + 1


class CountModel:
    """Topic counts per document, per word, and in total.

    ``n_td[d]`` and ``n_tw[w]`` are sparse ``{topic: count}`` dicts holding
    only positive counts, so their key sets are the supports T_d and T_w.
    ``n_t`` is a dense list of global topic counts.
    """

    def __init__(self, hyper: HyperParams, num_docs: int):
        self.hyper = hyper
        self.n_td: List[Dict[int, int]] = [{} for _ in range(num_docs)]
        self.n_tw: List[Dict[int, int]] = [{} for _ in range(hyper.vocab_size)]
        self.n_t: List[int] = [0] * hyper.num_topics

    @classmethod
    def from_assignments(cls, corpus: Corpus, z: Sequence[int], hyper: HyperParams) -> "CountModel":
        if len(z) != corpus.num_tokens:
            raise ConsistencyError("assignment length differs from token count")
        model = cls(hyper, corpus.num_docs)
        T = hyper.num_topics
        n_td, n_tw, n_t = model.n_td, model.n_tw, model.n_t
        for d, w, t in zip(corpus.docs.tolist(), corpus.words.tolist(), z):
            if not 0 <= t < T:
                raise ConsistencyError(f"topic {t} outside [0, {T})")
            _inc(n_td[d], t)
            _inc(n_tw[w], t)
            n_t[t] += 1
        return model

    @property
    def num_docs(self) -> int:
        return len(self.n_td)

    def remove_token(self, d: int, w: int, t: int) -> None:
        if self.n_t[t] < 1:
            raise ConsistencyError(f"global count for topic {t} is already zero")
        _dec(self.n_td[d], t, f"document {d}")
        _dec(self.n_tw[w], t, f"word {w}")
        self.n_t[t] -= 1

    def add_token(self, d: int, w: int, t: int) -> None:
        _inc(self.n_td[d], t)
        _inc(self.n_tw[w], t)
        self.n_t[t] += 1

    def copy(self) -> "CountModel":
        other = CountModel(self.hyper, 0)
        other.n_td = [dict(m) for m in self.n_td]
        other.n_tw = [dict(m) for m in self.n_tw]
        other.n_t = list(self.n_t)
        return other

    def __eq__(self, other) -> bool:
        if not isinstance(other, CountModel):
            return NotImplemented
        return (self.hyper == other.hyper and self.n_t == other.n_t
                and self.n_td == other.n_td and self.n_tw == other.n_tw)

    def total_tokens(self) -> int:
        return sum(self.n_t)

    def doc_topic_matrix(self) -> np.ndarray:
        out = np.zeros((self.num_docs, self.hyper.num_topics), dtype=np.int64)
        for d, m in enumerate(self.n_td):
            for t, c in m.items():
                out[d, t] = c
        return out

    def word_topic_matrix(self) -> np.ndarray:
        out = np.zeros((self.hyper.vocab_size, self.hyper.num_topics), dtype=np.int64)
        for w, m in enumerate(self.n_tw):
            for t, c in m.items():
                out[w, t] = c
        return out

    def check_invariants(self) -> None:
        """Raise :class:`ConsistencyError` unless the three views agree."""
        T = self.hyper.num_topics
        for name, rows in (("document", self.n_td), ("word", self.n_tw)):
            tally = [0] * T
            for k, m in enumerate(rows):
                for t, c in m.items():
                    if not (0 <= t < T and isinstance(c, int) and c > 0):
                        raise ConsistencyError(f"{name} {k}: bad entry {t}: {c}")
                    tally[t] += c
            if tally != self.n_t:
                raise ConsistencyError(f"{name} counts sum to {tally}, global is {self.n_t}")

    def check(self, corpus: Corpus, z: Sequence[int]) -> None:
        """Recount from ``z`` and raise unless every count matches exactly."""
        self.check_invariants()
        fresh = CountModel.from_assignments(corpus, z, self.hyper)
        if fresh != self:
            raise ConsistencyError("counts differ from a recount of the assignments")

    def topic_word_estimate(self) -> np.ndarray:
        """Posterior-mean topics ``(n_tw + beta) / (n_t + beta_bar)``, shape (T, J)."""
        h = self.hyper
        counts = self.word_topic_matrix().T.astype(float)
        return (counts + h.beta) / (np.asarray(self.n_t, dtype=float)[:, None] + h.beta_bar)


def init_assignments(corpus: Corpus, hyper: HyperParams, seed: int) -> Tuple[List[int], CountModel]:
    """Uniform random topics for every token and the matching counts."""
    if hyper.vocab_size != corpus.vocab_size:
        raise ContractError("hyper-parameters were built for a different vocabulary")
    rng = init_generator(seed)
    z = rng.integers(0, hyper.num_topics, size=corpus.num_tokens).tolist()
    return z, CountModel.from_assignments(corpus, z, hyper)


def conditional_weights(model: CountModel, d: int, w: int) -> List[float]:
    """Unnormalized full conditional of a removed token of word ``w`` in ``d``."""
    h = model.hyper
    nd, nw = model.n_td[d], model.n_tw[w]
    a, b, bb = h.alpha, h.beta, h.beta_bar
    return [(nd.get(t, 0) + a) * (nw.get(t, 0) + b) / (n + bb)
            for t, n in enumerate(model.n_t)]


def decompose(model: CountModel, d: int, w: int, order: str):
    """Split the conditional into ``coef * q + r``.

    Word order: ``coef = alpha``, ``q_t = (n_tw + beta) / (n_t + beta_bar)``
    and ``r_t = n_td q_t`` supported on T_d.  Doc order swaps the roles:
    ``coef = beta``, ``q_t = (n_td + alpha) / (n_t + beta_bar)`` and
    ``r_t = n_tw q_t`` supported on T_w.

    Returns ``(coef, q, r)`` with ``q`` a dense list and ``r`` a dict.
    """
    h = model.hyper
    nd, nw = model.n_td[d], model.n_tw[w]
    if order == WORD_ORDER:
        coef, dense, sparse, prior = h.alpha, nw, nd, h.beta
    elif order == DOC_ORDER:
        coef, dense, sparse, prior = h.beta, nd, nw, h.alpha
    else:
        raise ValueError(f"unknown order {order!r}")
    q = [(dense.get(t, 0) + prior) / (n + h.beta_bar) for t, n in enumerate(model.n_t)]
    r = {t: c * q[t] for t, c in sparse.items()}
    return coef, q, r


def two_level_sample(coef: float, q_tree: FTree, r_cdf: Cdf, u: float) -> int:
    """Draw from ``coef * q + r`` with ``u`` uniform on ``[0, coef*sum(q) + sum(r))``.

    ``u`` below the sparse mass selects from ``r`` by bisection; the rest is
    rescaled by ``1 / coef`` and handed to the tree holding ``q``.
    """
    r_total = r_cdf.total
    total = coef * q_tree.total + r_total
    if not 0.0 <= u < total:
        raise ContractError(f"u={u!r} outside [0, {total!r})")
    if u < r_total:
        return r_cdf.sample(u)
    v = (u - r_total) / coef
    if v >= q_tree.total:
        v = math.nextafter(q_tree.total, 0.0)
    return q_tree.descend(v)


def joint_log_likelihood(model: CountModel) -> float:
    """``log p(w, z)`` with theta and phi integrated out.

    Zero counts are folded into closed-form constants, so documents and
    topics without tokens contribute exactly zero and an empty corpus scores
    ``0.0``.
    """
    h = model.hyper
    T, J, a, b = h.num_topics, h.vocab_size, h.alpha, h.beta

    doc_vals = np.fromiter((c for m in model.n_td for c in m.values()), dtype=float)
    doc_lens = np.fromiter((sum(m.values()) for m in model.n_td if m), dtype=float)
    ll = float(np.sum(gammaln(doc_vals + a))) - doc_vals.size * float(gammaln(a))
    ll += doc_lens.size * float(gammaln(T * a)) - float(np.sum(gammaln(doc_lens + T * a)))

    word_vals = np.fromiter((c for m in model.n_tw for c in m.values()), dtype=float)
    topic_tot = np.asarray([n for n in model.n_t if n], dtype=float)
    ll += float(np.sum(gammaln(word_vals + b))) - word_vals.size * float(gammaln(b))
    ll += topic_tot.size * float(gammaln(J * b)) - float(np.sum(gammaln(topic_tot + J * b)))
    return ll
