"""Bag-of-words corpora: in-memory layout, UCI ingestion, synthetic data."""
from __future__ import annotations

import gzip
import io
import os
from dataclasses import dataclass, field
from typing import IO, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import CorpusFormatError

PathOrStream = Union[str, os.PathLike, IO[str]]


@dataclass
class Corpus:
    """Documents as a flat token stream with a document-major and a
    word-major view of the same occurrences.

    Token ``k`` belongs to document ``docs[k]`` and is word ``words[k]``.
    Tokens are stored document-major: document ``i`` owns the slice
    ``doc_ptr[i]:doc_ptr[i + 1]``.  ``word_tokens[word_ptr[j]:word_ptr[j + 1]]``
    lists the tokens of word ``j`` by ascending document id, then position.
    All ids are 0-based.
    """

    num_docs: int
    vocab_size: int
    words: np.ndarray
    docs: np.ndarray
    doc_ptr: np.ndarray
    word_ptr: np.ndarray
    word_tokens: np.ndarray
    vocab: Optional[List[str]] = field(default=None, repr=False)

    @classmethod
    def from_arrays(cls, num_docs: int, vocab_size: int, docs, words,
                    vocab: Optional[List[str]] = None) -> "Corpus":
        docs = np.asarray(docs, dtype=np.int64)
        words = np.asarray(words, dtype=np.int64)
        if docs.shape != words.shape or docs.ndim != 1:
            raise ValueError("docs and words must be aligned 1-d arrays")
        if docs.size:
            if docs.min() < 0 or docs.max() >= num_docs:
                raise ValueError("document id out of range")
            if words.min() < 0 or words.max() >= vocab_size:
                raise ValueError("word id out of range")
        order = np.argsort(docs, kind="stable")
        docs = docs[order]
        words = words[order]
        doc_ptr = np.zeros(num_docs + 1, dtype=np.int64)
        np.cumsum(np.bincount(docs, minlength=num_docs), out=doc_ptr[1:])
        word_tokens = np.argsort(words, kind="stable")
        word_ptr = np.zeros(vocab_size + 1, dtype=np.int64)
        np.cumsum(np.bincount(words, minlength=vocab_size), out=word_ptr[1:])
        return cls(num_docs, vocab_size, words, docs, doc_ptr, word_ptr,
                   word_tokens, vocab)

    @classmethod
    def from_documents(cls, documents: Sequence[Sequence[int]], vocab_size: Optional[int] = None,
                       vocab: Optional[List[str]] = None) -> "Corpus":
        """Build from one list of word ids per document."""
        docs = [i for i, doc in enumerate(documents) for _ in doc]
        words = [w for doc in documents for w in doc]
        if vocab_size is None:
            vocab_size = max(words) + 1 if words else 0
        return cls.from_arrays(len(documents), vocab_size, docs, words, vocab)

    @property
    def num_tokens(self) -> int:
        return int(self.words.size)

    def doc_lengths(self) -> np.ndarray:
        return np.diff(self.doc_ptr)

    def word_frequencies(self) -> np.ndarray:
        return np.diff(self.word_ptr)

    def document(self, i: int) -> np.ndarray:
        return self.words[self.doc_ptr[i]:self.doc_ptr[i + 1]]

    def occurrences(self, j: int) -> np.ndarray:
        """Token positions of word ``j``."""
        return self.word_tokens[self.word_ptr[j]:self.word_ptr[j + 1]]

    def check_views(self) -> bool:
        """Both views enumerate the same multiset of (doc, word) pairs."""
        if self.word_tokens.size != self.num_tokens:
            return False
        if not np.array_equal(np.sort(self.word_tokens), np.arange(self.num_tokens)):
            return False
        by_word = np.repeat(np.arange(self.vocab_size), self.word_frequencies())
        return bool(np.array_equal(self.words[self.word_tokens], by_word))


def _open_text(source: PathOrStream) -> Tuple[IO[str], bool]:
    if hasattr(source, "read"):
        return source, False
    path = os.fspath(source)
    if path.endswith(".gz"):
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="ascii"), True
    return open(path, "r", encoding="ascii"), True


def _ints(line: str, lineno: int, n: int) -> List[int]:
    parts = line.split()
    if len(parts) != n:
        raise CorpusFormatError(f"expected {n} integer field(s), got {len(parts)}", lineno)
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise CorpusFormatError(f"non-integer field in {line.strip()!r}", lineno) from None


def parse_uci_bow(docword: PathOrStream, vocab: Optional[PathOrStream] = None) -> Corpus:
    """Read a UCI ``docword`` file (and optional ``vocab`` file).

    The header is three lines holding D, W and NNZ; each following line is a
    ``docID wordID count`` triple with 1-based ids.  Any ASCII whitespace
    separates fields and blank lines are ignored.  A path ending in ``.gz`` is
    decompressed on the fly.
    """
    stream, owned = _open_text(docword)
    try:
        lines = ((n, ln) for n, ln in enumerate(stream, start=1) if ln.strip())
        header = []
        for lineno, line in lines:
            header.append(_ints(line, lineno, 1)[0])
            if len(header) == 3:
                break
        if len(header) != 3:
            raise CorpusFormatError("truncated header: need D, W and NNZ lines")
        num_docs, vocab_size, nnz = header
        if min(header) < 0:
            raise CorpusFormatError("negative header value")
        doc_ids = np.empty(nnz, dtype=np.int64)
        word_ids = np.empty(nnz, dtype=np.int64)
        counts = np.empty(nnz, dtype=np.int64)
        k = 0
        for lineno, line in lines:
            if k == nnz:
                raise CorpusFormatError(f"more than NNZ={nnz} triples", lineno)
            d, w, c = _ints(line, lineno, 3)
            if not (1 <= d <= num_docs and 1 <= w <= vocab_size):
                raise CorpusFormatError(f"id out of range: doc {d}, word {w}", lineno)
            if c < 1:
                raise CorpusFormatError(f"count {c} is not positive", lineno)
            doc_ids[k], word_ids[k], counts[k] = d - 1, w - 1, c
            k += 1
        if k != nnz:
            raise CorpusFormatError(f"header promises NNZ={nnz} triples, found {k}")
    finally:
        if owned:
            stream.close()

    names = None
    if vocab is not None:
        vstream, vowned = _open_text(vocab)
        try:
            names = [ln.strip() for ln in vstream if ln.strip()]
        finally:
            if vowned:
                vstream.close()
        if len(names) != vocab_size:
            raise CorpusFormatError(f"vocabulary has {len(names)} entries, header says W={vocab_size}")

    corpus = Corpus.from_arrays(num_docs, vocab_size, np.repeat(doc_ids, counts),
                                np.repeat(word_ids, counts), names)
    if corpus.num_tokens != int(counts.sum()) or not corpus.check_views():
        raise CorpusFormatError("document-major and word-major views disagree")
    return corpus


def write_uci_bow(corpus: Corpus, stream: IO[str]) -> None:
    """Write ``corpus`` in UCI docword layout, one triple per (doc, word)."""
    key = corpus.docs * corpus.vocab_size + corpus.words
    uniq, counts = np.unique(key, return_counts=True)
    stream.write(f"{corpus.num_docs}\n{corpus.vocab_size}\n{uniq.size}\n")
    for k, c in zip(uniq.tolist(), counts.tolist()):
        d, w = divmod(k, corpus.vocab_size)
        stream.write(f"{d + 1} {w + 1} {c}\n")


@dataclass(frozen=True)
class SyntheticSpec:
    num_docs: int
    vocab_size: int
    num_topics: int
    mean_length: float
    alpha: float
    beta: float
    seed: int = 0

    def __post_init__(self):
        for name in ("num_docs", "vocab_size", "num_topics", "mean_length", "alpha", "beta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def generate_synthetic(spec: SyntheticSpec, lengths: Optional[Iterable[int]] = None):
    """Draw a corpus from the LDA generative process.

    Topics are drawn from Dirichlet(beta) over the vocabulary and document
    proportions from Dirichlet(alpha) over topics; each token draws a topic
    from its document's proportions and a word from that topic.  Document
    lengths are Poisson(mean_length) floored at 1 unless ``lengths`` is given.

    Returns
    -------
    corpus, phi, theta
        ``phi`` has shape (T, J); ``theta`` has shape (I, T).
    """
    rng = np.random.default_rng(spec.seed)
    T, J, I = spec.num_topics, spec.vocab_size, spec.num_docs
    phi = rng.dirichlet(np.full(J, spec.beta), size=T)
    theta = rng.dirichlet(np.full(T, spec.alpha), size=I)
    if lengths is None:
        n = np.maximum(rng.poisson(spec.mean_length, size=I), 1)
    else:
        n = np.asarray(list(lengths), dtype=np.int64)
    cum_phi = np.cumsum(phi, axis=1)
    docs, words = [], []
    for i in range(I):
        z = rng.choice(T, size=int(n[i]), p=theta[i])
        u = rng.random(int(n[i]))
        # inverse-cdf draw of one word per token from its topic's row
        w = np.minimum((cum_phi[z] <= (u * cum_phi[z, -1])[:, None]).sum(axis=1), J - 1)
        docs.append(np.full(int(n[i]), i))
        words.append(w)
    docs = np.concatenate(docs) if docs else np.empty(0, dtype=np.int64)
    words = np.concatenate(words) if words else np.empty(0, dtype=np.int64)
    return Corpus.from_arrays(I, J, docs, words), phi, theta
