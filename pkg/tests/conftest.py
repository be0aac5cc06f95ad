import numpy as np
import pytest

from nomadlda.corpus import Corpus, SyntheticSpec, generate_synthetic
from nomadlda.model import CountModel, HyperParams

FIXTURE_SPEC = SyntheticSpec(num_docs=500, vocab_size=200, num_topics=5, mean_length=50,
                             alpha=0.5, beta=0.1, seed=1)

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def planted():
    """The 500 x 200 planted-topic corpus with T=5: (corpus, phi, theta)."""
    return generate_synthetic(FIXTURE_SPEC)


@pytest.fixture(scope="session")
def fixture_corpus(planted):
    return planted[0]


@pytest.fixture(scope="session")
def fixture_hyper(fixture_corpus):
    return HyperParams.default(FIXTURE_SPEC.num_topics, fixture_corpus.vocab_size)


@pytest.fixture
def small_corpus():
    spec = SyntheticSpec(num_docs=30, vocab_size=25, num_topics=4, mean_length=12,
                         alpha=0.3, beta=0.2, seed=7)
    return generate_synthetic(spec)[0]


@pytest.fixture
def frozen():
    """Three short documents over six words, T=4, with fixed assignments."""
    docs = [[0, 1, 1, 2, 5, 0], [3, 4, 4, 5, 2], [0, 3, 5, 5, 1, 2, 4]]
    corpus = Corpus.from_documents(docs, vocab_size=6)
    hyper = HyperParams(num_topics=4, vocab_size=6, alpha=0.4, beta=0.15)
    z = [(3 * k + k // 4) % 4 for k in range(corpus.num_tokens)]
    return corpus, hyper, z, CountModel.from_assignments(corpus, z, hyper)


@pytest.fixture
def report(request):
    """Record a one-line verdict for the acceptance summary."""

    def _report(label: str, ok, detail: str = "") -> None:
        verdict = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        line = f"{verdict}  {label}" + (f"  ({detail})" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def dense_counts(corpus, z, T, skip=None):
    """Doc-topic, word-topic and topic totals recounted with numpy, optionally
    leaving out token ``skip``."""
    keep = np.ones(corpus.num_tokens, dtype=bool)
    if skip is not None:
        keep[skip] = False
    z = np.asarray(z)[keep]
    d = corpus.docs[keep]
    w = corpus.words[keep]
    ndt = np.zeros((corpus.num_docs, T))
    nwt = np.zeros((corpus.vocab_size, T))
    np.add.at(ndt, (d, z), 1)
    np.add.at(nwt, (w, z), 1)
    return ndt, nwt, nwt.sum(axis=0)


def conditional_oracle(corpus, z, hyper, k):
    """Normalized full conditional of token ``k`` from dense recounts."""
    ndt, nwt, nt = dense_counts(corpus, z, hyper.num_topics, skip=k)
    d, w = corpus.docs[k], corpus.words[k]
    p = (ndt[d] + hyper.alpha) * (nwt[w] + hyper.beta) / (nt + hyper.vocab_size * hyper.beta)
    return p / p.sum()


def interval_measure(draw, total, T, grid=8192):
    """Lebesgue measure of ``{u in [0, total) : draw(u) == t}`` for each t.

    ``draw`` must be piecewise constant with pieces wider than
    ``total / grid``; boundaries between grid points are located by bisection
    down to adjacent floats.
    """
    us = [total * i / grid for i in range(grid)] + [np.nextafter(total, 0.0)]
    outs = [draw(u) for u in us]
    mass = np.zeros(T)
    start = 0.0
    for i in range(grid):
        a, b, oa, ob = us[i], us[i + 1], outs[i], outs[i + 1]
        if oa == ob:
            continue
        while True:
            mid = 0.5 * (a + b)
            if mid <= a or mid >= b:
                break
            if draw(mid) == oa:
                a = mid
            else:
                b = mid
        mass[oa] += b - start
        start = b
    mass[outs[-1]] += total - start
    return mass / total


def kernel_step_laws(kind, corpus, hyper, z, model):
    """For every token, the per-step law a kernel realizes over ``u`` and the
    oracle conditional.  The chain is left unchanged."""
    from nomadlda.serial import DocOrderKernel, SparseKernel, WordOrderKernel

    out = []
    T = hyper.num_topics
    if kind == "word":
        kernel = WordOrderKernel(hyper, model.n_td, model.n_t)
        for w in range(corpus.vocab_size):
            kernel.begin_word(model.n_tw[w])
            for k in corpus.occurrences(w).tolist():
                d = int(corpus.docs[k])
                total = kernel.prepare(d, z[k])
                out.append((k, interval_measure(kernel.draw, total, T),
                            conditional_oracle(corpus, z, hyper, k)))
                kernel.commit(d, z[k])
            kernel.end_word()
        return out
    kernel = (DocOrderKernel if kind == "doc" else SparseKernel)(hyper, model)
    for d in range(corpus.num_docs):
        kernel.begin_doc(d)
        for k in range(int(corpus.doc_ptr[d]), int(corpus.doc_ptr[d + 1])):
            w = int(corpus.words[k])
            total = kernel.prepare(w, z[k])
            out.append((k, interval_measure(kernel.draw, total, T),
                        conditional_oracle(corpus, z, hyper, k)))
            kernel.commit(w, z[k])
        kernel.end_doc()
    return out


def alias_chain_tv(corpus, hyper, z, model, k, steps, mh_steps, seed=0, stale_moves=6):
    """Total-variation distance between AliasLDA's output for token ``k`` and
    its conditional, with the proposal table deliberately stale."""
    from nomadlda.rng import spawn_streams
    from nomadlda.serial import AliasKernel

    stream = spawn_streams(seed, 1)[0]
    kernel = AliasKernel(hyper, model, mh_steps, rebuild_after=10 ** 12)
    d, w = int(corpus.docs[k]), int(corpus.words[k])
    kernel.build_table(w)
    # move a few other tokens so the table no longer matches the counts
    rng = np.random.default_rng(seed)
    z = list(z)
    others = [j for j in range(corpus.num_tokens) if j != k]
    for j in rng.choice(others, size=stale_moves, replace=False).tolist():
        dj, wj = int(corpus.docs[j]), int(corpus.words[j])
        model.remove_token(dj, wj, z[j])
        z[j] = (z[j] + 1 + int(rng.integers(hyper.num_topics - 1))) % hyper.num_topics
        model.add_token(dj, wj, z[j])
    oracle = conditional_oracle(corpus, z, hyper, k)
    stale = np.asarray(kernel.stale[w])
    kernel.begin_doc(d)
    hist = np.zeros(hyper.num_topics)
    t0 = z[k]
    for _ in range(steps):
        kernel.prepare(w, t0)
        hist[kernel.mh_chain(t0, stream)] += 1
        kernel.commit(w, t0)
    kernel.end_doc()
    fresh = np.asarray([hyper.alpha * (model.n_tw[w].get(t, 0) - (t == t0) + hyper.beta)
                        / (model.n_t[t] - (t == t0) + hyper.beta_bar) for t in range(hyper.num_topics)])
    return 0.5 * np.abs(hist / steps - oracle).sum(), float(np.abs(stale - fresh).max())
