"""Single-threaded Gibbs sweeps: F+LDA in word and document order, plus the
SparseLDA and AliasLDA baselines.

Each algorithm is a small state machine ("kernel") that owns the auxiliary
structures for one sweep.  Resampling one token is split in three steps so
the per-step law can be inspected from tests:

``prepare``
    remove the token from the counts, refresh the structures, return the
    total mass.
``draw(u)``
    map ``u`` uniform on ``[0, total)`` to a topic without side effects.
``commit``
    add the token back under the chosen topic.

AliasLDA cannot be written this way because its Metropolis-Hastings chain
consumes several uniforms; it exposes :meth:`AliasKernel.mh_chain` instead.
"""
from __future__ import annotations

import bisect
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

from .corpus import Corpus
from .errors import ConsistencyError
from .model import CountModel, HyperParams, init_assignments, joint_log_likelihood
from .rng import UniformStream, spawn_streams
from .samplers import AliasTable, FTree
from .trace import TraceRecord, TrainTrace

ALGORITHMS = ("flda-word", "flda-doc", "sparse", "alias")


def _dec(counts: Dict[int, int], t: int) -> None:
    c = counts.get(t, 0)
    if c > 1:
        counts[t] = c - 1
    elif c == 1:
        del counts[t]
    else:
        raise ConsistencyError(f"count for topic {t} is already zero")


class WordOrderKernel:
    """F+LDA with word-by-word sampling.

    The tree holds ``q_t = (n_tw + beta) / (n_t + beta_bar)`` for the current
    word; between words it holds the word-free base ``beta / (n_t + beta_bar)``.
    The sparse part ``r_t = n_td q_t`` lives on T_d and is searched by
    bisection.

    ``n_td`` and ``n_t`` are borrowed and mutated in place, which lets a
    nomad worker run the same kernel against its local shadow counts.
    """

    def __init__(self, hyper: HyperParams, n_td: List[Dict[int, int]], n_t: List[int]):
        self.alpha = hyper.alpha
        self.beta = hyper.beta
        self.bbar = hyper.beta_bar
        self.n_td = n_td
        self.n_t = n_t
        self.n_tw: Dict[int, int] = {}
        self.tree = FTree(self._base())
        self._rt: List[int] = []
        self._rc: List[float] = []
        self.touched = 0

    def _base(self) -> List[float]:
        b, bb = self.beta, self.bbar
        return [b / (n + bb) for n in self.n_t]

    def reset(self) -> None:
        """Rebuild the tree from the current totals (no word active)."""
        self.tree.assign(self._base())

    def refresh(self, topics) -> None:
        """Re-anchor base leaves after ``n_t`` changed outside the kernel."""
        b, bb, n_t, tree = self.beta, self.bbar, self.n_t, self.tree
        for t in topics:
            tree.set(t, b / (n_t[t] + bb))

    def begin_word(self, n_tw: Dict[int, int]) -> None:
        self.n_tw = n_tw
        n_t, bb, tree = self.n_t, self.bbar, self.tree
        for t, c in n_tw.items():
            tree.update(t, c / (n_t[t] + bb))

    def end_word(self) -> None:
        n_t, bb, tree = self.n_t, self.bbar, self.tree
        for t, c in self.n_tw.items():
            tree.update(t, -c / (n_t[t] + bb))
        self.n_tw = {}

    def prepare(self, d: int, t: int) -> float:
        nd = self.n_td[d]
        nw = self.n_tw
        n_t = self.n_t
        if n_t[t] < 1:
            raise ConsistencyError(f"global count for topic {t} is already zero")
        _dec(nd, t)
        _dec(nw, t)
        n_t[t] -= 1
        tree = self.tree
        tree.set(t, (nw.get(t, 0) + self.beta) / (n_t[t] + self.bbar))
        F = tree.F
        base = tree.base
        rt = []
        rc = []
        s = 0.0
        for k, c in nd.items():
            s += c * F[base + k]
            rt.append(k)
            rc.append(s)
        self._rt = rt
        self._rc = rc
        self.touched += len(rt)
        return self.alpha * F[1] + s

    def draw(self, u: float) -> int:
        rc = self._rc
        if rc and u < rc[-1]:
            return self._rt[bisect.bisect_right(rc, u)]
        tree = self.tree
        total = tree.F[1]
        v = (u - rc[-1] if rc else u) / self.alpha
        if v >= total:
            v = math.nextafter(total, 0.0)
        return tree.descend(v)

    def commit(self, d: int, t: int) -> None:
        nd = self.n_td[d]
        nw = self.n_tw
        nd[t] = nd.get(t, 0) + 1
        c = nw.get(t, 0) + 1
        nw[t] = c
        self.n_t[t] += 1
        self.tree.set(t, (c + self.beta) / (self.n_t[t] + self.bbar))

    def resample(self, d: int, t: int, stream: UniformStream) -> int:
        total = self.prepare(d, t)
        t = self.draw(stream.random() * total)
        self.commit(d, t)
        return t


class DocOrderKernel:
    """F+LDA with document-by-document sampling.

    The tree holds ``q_t = (n_td + alpha) / (n_t + beta_bar)`` for the current
    document, ``r_t = n_tw q_t`` lives on T_w.
    """

    def __init__(self, hyper: HyperParams, model: CountModel):
        self.alpha = hyper.alpha
        self.beta = hyper.beta
        self.bbar = hyper.beta_bar
        self.model = model
        self.n_t = model.n_t
        a, bb = self.alpha, self.bbar
        self.tree = FTree([a / (n + bb) for n in self.n_t])
        self.nd: Dict[int, int] = {}
        self._rt: List[int] = []
        self._rc: List[float] = []

    def begin_doc(self, d: int) -> None:
        self.nd = self.model.n_td[d]
        n_t, bb, tree = self.n_t, self.bbar, self.tree
        for t, c in self.nd.items():
            tree.update(t, c / (n_t[t] + bb))

    def end_doc(self) -> None:
        n_t, bb, tree = self.n_t, self.bbar, self.tree
        for t, c in self.nd.items():
            tree.update(t, -c / (n_t[t] + bb))
        self.nd = {}

    def prepare(self, w: int, t: int) -> float:
        nd = self.nd
        nw = self.model.n_tw[w]
        n_t = self.n_t
        if n_t[t] < 1:
            raise ConsistencyError(f"global count for topic {t} is already zero")
        _dec(nd, t)
        _dec(nw, t)
        n_t[t] -= 1
        tree = self.tree
        tree.set(t, (nd.get(t, 0) + self.alpha) / (n_t[t] + self.bbar))
        F = tree.F
        base = tree.base
        rt = []
        rc = []
        s = 0.0
        for k, c in nw.items():
            s += c * F[base + k]
            rt.append(k)
            rc.append(s)
        self._rt = rt
        self._rc = rc
        return self.beta * F[1] + s

    def draw(self, u: float) -> int:
        rc = self._rc
        if rc and u < rc[-1]:
            return self._rt[bisect.bisect_right(rc, u)]
        tree = self.tree
        total = tree.F[1]
        v = (u - rc[-1] if rc else u) / self.beta
        if v >= total:
            v = math.nextafter(total, 0.0)
        return tree.descend(v)

    def commit(self, w: int, t: int) -> None:
        nd = self.nd
        nw = self.model.n_tw[w]
        c = nd.get(t, 0) + 1
        nd[t] = c
        nw[t] = nw.get(t, 0) + 1
        self.n_t[t] += 1
        self.tree.set(t, (c + self.alpha) / (self.n_t[t] + self.bbar))

    def resample(self, w: int, t: int, stream: UniformStream) -> int:
        total = self.prepare(w, t)
        t = self.draw(stream.random() * total)
        self.commit(w, t)
        return t


class SparseKernel:
    """SparseLDA: smoothing + document + word buckets, each searched linearly.

    ``p_t = alpha beta / D_t + beta n_td / D_t + n_tw (n_td + alpha) / D_t``
    with ``D_t = n_t + beta_bar``.  The word bucket is checked first since it
    usually carries most of the mass.
    """

    def __init__(self, hyper: HyperParams, model: CountModel):
        self.alpha = hyper.alpha
        self.beta = hyper.beta
        self.bbar = hyper.beta_bar
        self.model = model
        self.n_t = model.n_t
        a, b, bb = self.alpha, self.beta, self.bbar
        self.smooth = [a * b / (n + bb) for n in self.n_t]
        self.smooth_total = sum(self.smooth)
        # coef[t] = (n_td + alpha) / (n_t + beta_bar) for the current document
        self.coef = [a / (n + bb) for n in self.n_t]
        self.dterm = [0.0] * len(self.n_t)
        self.doc_total = 0.0
        self.nd: Dict[int, int] = {}
        self._wt: List[int] = []
        self._wc: List[float] = []

    def _refresh(self, t: int) -> None:
        a, b, denom = self.alpha, self.beta, self.n_t[t] + self.bbar
        c = self.nd.get(t, 0)
        s = a * b / denom
        self.smooth_total += s - self.smooth[t]
        self.smooth[t] = s
        dt = b * c / denom
        self.doc_total += dt - self.dterm[t]
        self.dterm[t] = dt
        self.coef[t] = (c + a) / denom

    def begin_doc(self, d: int) -> None:
        self.nd = self.model.n_td[d]
        a, b, bb = self.alpha, self.beta, self.bbar
        total = 0.0
        for t, c in self.nd.items():
            denom = self.n_t[t] + bb
            self.dterm[t] = b * c / denom
            self.coef[t] = (c + a) / denom
            total += self.dterm[t]
        self.doc_total = total

    def end_doc(self) -> None:
        a, bb = self.alpha, self.bbar
        for t in self.nd:
            self.dterm[t] = 0.0
            self.coef[t] = a / (self.n_t[t] + bb)
        self.doc_total = 0.0
        self.nd = {}

    def prepare(self, w: int, t: int) -> float:
        nw = self.model.n_tw[w]
        if self.n_t[t] < 1:
            raise ConsistencyError(f"global count for topic {t} is already zero")
        _dec(self.nd, t)
        _dec(nw, t)
        self.n_t[t] -= 1
        self._refresh(t)
        coef = self.coef
        wt = []
        wc = []
        s = 0.0
        for k, c in nw.items():
            s += c * coef[k]
            wt.append(k)
            wc.append(s)
        self._wt = wt
        self._wc = wc
        return s + self.doc_total + self.smooth_total

    def draw(self, u: float) -> int:
        wc = self._wc
        word_total = wc[-1] if wc else 0.0
        if u < word_total:
            for k, c in enumerate(wc):
                if c > u:
                    return self._wt[k]
            return self._wt[-1]
        u -= word_total
        if u < self.doc_total:
            dterm = self.dterm
            s = 0.0
            last = -1
            for k in self.nd:
                s += dterm[k]
                last = k
                if s > u:
                    return k
            if last >= 0:
                return last
        u -= self.doc_total
        s = 0.0
        for k, x in enumerate(self.smooth):
            s += x
            if s > u:
                return k
        return len(self.smooth) - 1

    def commit(self, w: int, t: int) -> None:
        self.nd[t] = self.nd.get(t, 0) + 1
        nw = self.model.n_tw[w]
        nw[t] = nw.get(t, 0) + 1
        self.n_t[t] += 1
        self._refresh(t)

    def resample(self, w: int, t: int, stream: UniformStream) -> int:
        total = self.prepare(w, t)
        t = self.draw(stream.random() * total)
        self.commit(w, t)
        return t


class AliasKernel:
    """AliasLDA: Metropolis-Hastings with a partly stale alias proposal.

    The proposal for word ``w`` mixes a stale dense part
    ``alpha (n_tw + beta) / (n_t + beta_bar)`` held in a per-word alias table,
    and a fresh sparse part ``n_td (n_tw + beta) / (n_t + beta_bar)`` on T_d.
    A word's table is rebuilt once ``rebuild_after`` draws (default T) have
    been taken from it.
    """

    def __init__(self, hyper: HyperParams, model: CountModel, mh_steps: int = 2,
                 rebuild_after: Optional[int] = None):
        if mh_steps < 1:
            raise ValueError("mh_steps must be >= 1")
        self.alpha = hyper.alpha
        self.beta = hyper.beta
        self.bbar = hyper.beta_bar
        self.T = hyper.num_topics
        self.model = model
        self.n_t = model.n_t
        self.mh_steps = mh_steps
        self.rebuild_after = self.T if rebuild_after is None else rebuild_after
        self.tables: Dict[int, AliasTable] = {}
        self.stale: Dict[int, List[float]] = {}
        self.draws: Dict[int, int] = {}
        self.nd: Dict[int, int] = {}
        self.w = -1
        self._rt: List[int] = []
        self._rc: List[float] = []

    def build_table(self, w: int) -> None:
        nw = self.model.n_tw[w]
        a, b, bb = self.alpha, self.beta, self.bbar
        q = [a * (nw.get(t, 0) + b) / (n + bb) for t, n in enumerate(self.n_t)]
        self.stale[w] = q
        self.tables[w] = AliasTable.build(q)
        self.draws[w] = 0

    def begin_doc(self, d: int) -> None:
        self.nd = self.model.n_td[d]

    def end_doc(self) -> None:
        self.nd = {}

    def prepare(self, w: int, t: int) -> float:
        nw = self.model.n_tw[w]
        if self.n_t[t] < 1:
            raise ConsistencyError(f"global count for topic {t} is already zero")
        _dec(self.nd, t)
        _dec(nw, t)
        self.n_t[t] -= 1
        self.w = w
        if w not in self.tables or self.draws[w] >= self.rebuild_after:
            self.build_table(w)
        b, bb, n_t = self.beta, self.bbar, self.n_t
        rt = []
        rc = []
        s = 0.0
        for k, c in self.nd.items():
            s += c * (nw.get(k, 0) + b) / (n_t[k] + bb)
            rt.append(k)
            rc.append(s)
        self._rt = rt
        self._rc = rc
        return s + self.tables[w].total

    def target(self, t: int) -> float:
        nw = self.model.n_tw[self.w]
        return ((self.nd.get(t, 0) + self.alpha) * (nw.get(t, 0) + self.beta)
                / (self.n_t[t] + self.bbar))

    def proposal(self, t: int) -> float:
        nw = self.model.n_tw[self.w]
        fresh = self.nd.get(t, 0) * (nw.get(t, 0) + self.beta) / (self.n_t[t] + self.bbar)
        return self.stale[self.w][t] + fresh

    def acceptance_ratio(self, cur: int, new: int) -> float:
        return (self.target(new) * self.proposal(cur)) / (self.target(cur) * self.proposal(new))

    def propose(self, u: float) -> int:
        """Proposal for ``u`` uniform on ``[0, sparse mass + stale mass)``."""
        rc = self._rc
        if rc and u < rc[-1]:
            return self._rt[bisect.bisect_right(rc, u)]
        table = self.tables[self.w]
        self.draws[self.w] += 1
        r_total = rc[-1] if rc else 0.0
        v = (u - r_total) / table.total * self.T
        if v >= self.T:
            v = math.nextafter(float(self.T), 0.0)
        return table.sample(v)

    def mh_chain(self, start: int, stream: UniformStream) -> int:
        total = (self._rc[-1] if self._rc else 0.0) + self.tables[self.w].total
        cur = start
        for _ in range(self.mh_steps):
            new = self.propose(stream.random() * total)
            if new == cur:
                continue
            ratio = self.acceptance_ratio(cur, new)
            if ratio >= 1.0 or stream.random() < ratio:
                cur = new
        return cur

    def commit(self, w: int, t: int) -> None:
        self.nd[t] = self.nd.get(t, 0) + 1
        nw = self.model.n_tw[w]
        nw[t] = nw.get(t, 0) + 1
        self.n_t[t] += 1

    def resample(self, w: int, t: int, stream: UniformStream) -> int:
        self.prepare(w, t)
        new = self.mh_chain(t, stream)
        self.commit(w, new)
        return new


def _token_lists(corpus: Corpus):
    cache = getattr(corpus, "_lists", None)
    if cache is None:
        cache = (corpus.docs.tolist(), corpus.words.tolist(), corpus.doc_ptr.tolist(),
                 corpus.word_ptr.tolist(), corpus.word_tokens.tolist())
        corpus._lists = cache
    return cache


def flda_word_epoch(corpus: Corpus, z: List[int], model: CountModel,
                    stream: UniformStream) -> WordOrderKernel:
    """One sweep over all tokens, word by word."""
    docs, _, _, word_ptr, word_tokens = _token_lists(corpus)
    kernel = WordOrderKernel(model.hyper, model.n_td, model.n_t)
    n_tw = model.n_tw
    for w in range(corpus.vocab_size):
        lo, hi = word_ptr[w], word_ptr[w + 1]
        if lo == hi:
            continue
        kernel.begin_word(n_tw[w])
        resample = kernel.resample
        for k in word_tokens[lo:hi]:
            z[k] = resample(docs[k], z[k], stream)
        kernel.end_word()
    return kernel


def _doc_epoch(kernel, corpus: Corpus, z: List[int], stream: UniformStream):
    _, words, doc_ptr, _, _ = _token_lists(corpus)
    for d in range(corpus.num_docs):
        lo, hi = doc_ptr[d], doc_ptr[d + 1]
        if lo == hi:
            continue
        kernel.begin_doc(d)
        resample = kernel.resample
        for k in range(lo, hi):
            z[k] = resample(words[k], z[k], stream)
        kernel.end_doc()
    return kernel


def flda_doc_epoch(corpus: Corpus, z: List[int], model: CountModel,
                   stream: UniformStream) -> DocOrderKernel:
    """One sweep over all tokens, document by document."""
    return _doc_epoch(DocOrderKernel(model.hyper, model), corpus, z, stream)


def sparse_lda_epoch(corpus: Corpus, z: List[int], model: CountModel,
                     stream: UniformStream) -> SparseKernel:
    return _doc_epoch(SparseKernel(model.hyper, model), corpus, z, stream)


def alias_lda_epoch(corpus: Corpus, z: List[int], model: CountModel,
                    stream: UniformStream, mh_steps: int = 2,
                    kernel: Optional[AliasKernel] = None) -> AliasKernel:
    """One sweep of AliasLDA.  Pass ``kernel`` to keep stale tables across sweeps."""
    if kernel is None:
        kernel = AliasKernel(model.hyper, model, mh_steps)
    return _doc_epoch(kernel, corpus, z, stream)


@dataclass
class TrainerConfig:
    algorithm: str
    iterations: int
    hyper: HyperParams
    seed: int = 0
    mh_steps: int = 2

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; pick one of {ALGORITHMS}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.mh_steps < 1:
            raise ValueError("mh_steps must be >= 1")


@dataclass
class TrainState:
    """Everything needed to continue a chain."""

    z: List[int]
    model: CountModel
    stream: UniformStream
    iteration: int = 0
    trace: TrainTrace = field(default_factory=TrainTrace)
    alias_kernel: Optional[AliasKernel] = None


def start_state(corpus: Corpus, config: TrainerConfig) -> TrainState:
    z, model = init_assignments(corpus, config.hyper, config.seed)
    stream = spawn_streams(config.seed, 1)[0]
    return TrainState(z, model, stream, 0, TrainTrace(joint_log_likelihood(model)))


def train(corpus: Corpus, config: TrainerConfig, state: Optional[TrainState] = None,
          on_record: Optional[Callable[[TraceRecord], None]] = None) -> TrainState:
    """Run ``config.iterations`` sweeps, scoring the chain after each one.

    Starting from ``state`` continues an earlier run; the result is then
    identical to a single longer run with the same seed.
    """
    if state is None:
        state = start_state(corpus, config)
    z, model, stream = state.z, state.model, state.stream
    for _ in range(config.iterations):
        t0 = time.perf_counter()
        algo = config.algorithm
        if algo == "flda-word":
            flda_word_epoch(corpus, z, model, stream)
        elif algo == "flda-doc":
            flda_doc_epoch(corpus, z, model, stream)
        elif algo == "sparse":
            sparse_lda_epoch(corpus, z, model, stream)
        else:
            state.alias_kernel = alias_lda_epoch(corpus, z, model, stream, config.mh_steps,
                                                 state.alias_kernel)
        seconds = time.perf_counter() - t0
        state.iteration += 1
        record = TraceRecord(state.iteration, joint_log_likelihood(model), seconds,
                             corpus.num_tokens / seconds if seconds > 0 else 0.0,
                             algo, 1, config.seed)
        state.trace.append(record)
        if on_record is not None:
            on_record(record)
    return state
