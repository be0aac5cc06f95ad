"""Asynchronous, lock-free parallel F+LDA by nomadic token passing.

Documents are partitioned across workers once and never move.  Each word's
topic counts travel as a *word token*; only the worker holding the token may
sample occurrences of that word, so the counts it samples against are always
current.  The global topic totals travel as a single *sum token*: every
worker samples against a private shadow copy and folds its accumulated
difference into the token whenever the token passes through.

Workers are threads exchanging tokens through a :class:`Transport`.  Tokens
are handed over by reference but never shared: a sender drops every
reference before the receiver can pick the token up.  Under CPython's GIL the
threads interleave rather than run simultaneously, so the point of this
module is the protocol and its invariants, not wall-clock speedup.
"""
from __future__ import annotations

import collections
import logging
import queue
import struct
import threading
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .corpus import Corpus
from .errors import ContractError
from .model import CountModel, HyperParams, init_assignments, joint_log_likelihood
from .rng import UniformStream, spawn_streams
from .serial import WordOrderKernel
from .trace import TraceRecord, TrainTrace

log = logging.getLogger(__name__)

RING = "ring"
UNIFORM = "uniform"
ROUTING_POLICIES = (RING, UNIFORM)

# stream families: sampling streams must not shift when routing draws change
_SAMPLING, _ROUTING = 0, 1


@dataclass
class WordToken:
    """Sole owner of one word's topic counts."""

    word: int
    counts: Dict[int, int]
    visits: int = 0
    home: int = 0  # next worker when released from the controller
    owner: Optional[int] = field(default=None, repr=False)

    def encode(self) -> bytes:
        """``<u32 word><u32 nnz>`` then ``nnz`` pairs of ``<u32 topic><u32 count>``."""
        items = list(self.counts.items())
        flat = [x for pair in items for x in pair]
        return struct.pack(f"<II{2 * len(items)}I", self.word, len(items), *flat)

    @classmethod
    def decode(cls, data: bytes) -> "WordToken":
        word, nnz = struct.unpack_from("<II", data)
        if len(data) != 8 + 8 * nnz:
            raise ValueError("word token payload has the wrong length")
        flat = struct.unpack_from(f"<{2 * nnz}I", data, 8)
        return cls(word, dict(zip(flat[0::2], flat[1::2])))


@dataclass
class SumToken:
    """Carrier of the global topic totals."""

    counts: List[int]
    published_moves: int = 0
    final_hops: int = 0
    owner: Optional[int] = field(default=None, repr=False)

    def encode(self) -> bytes:
        """``<u32 T>`` then ``T`` little-endian int64 totals."""
        return struct.pack(f"<I{len(self.counts)}q", len(self.counts), *self.counts)

    @classmethod
    def decode(cls, data: bytes) -> "SumToken":
        (n,) = struct.unpack_from("<I", data)
        if len(data) != 4 + 8 * n:
            raise ValueError("sum token payload has the wrong length")
        return cls(list(struct.unpack_from(f"<{n}q", data, 4)))


class _Control:
    __slots__ = ("kind",)

    def __init__(self, kind: str):
        self.kind = kind

    def __repr__(self):
        return f"<{self.kind}>"


BEGIN_EPOCH = _Control("begin-epoch")
STOP = _Control("stop")


class Router:
    """Chooses the worker a finished token goes to next."""

    def __init__(self, workers: int, policy: str = RING):
        if policy not in ROUTING_POLICIES:
            raise ValueError(f"unknown routing policy {policy!r}")
        if workers < 1:
            raise ValueError("need at least one worker")
        self.workers = workers
        self.policy = policy

    def next(self, sender: int, stream: Optional[UniformStream] = None) -> int:
        p = self.workers
        if p == 1:
            return 0
        if self.policy == RING:
            return (sender + 1) % p
        k = stream.integers(p - 1)
        return k if k < sender else k + 1


class Transport:
    """One inbound FIFO per worker.  A network transport would implement the
    same three methods over sockets using the tokens' ``encode``/``decode``."""

    def __init__(self, workers: int):
        self.inboxes = [queue.SimpleQueue() for _ in range(workers)]

    def send(self, dest: int, msg) -> None:
        self.inboxes[dest].put(msg)

    def recv(self, worker: int, timeout: Optional[float] = None):
        return self.inboxes[worker].get(timeout=timeout)

    def poll(self, worker: int):
        try:
            return self.inboxes[worker].get_nowait()
        except queue.Empty:
            return None

    def idle(self) -> bool:
        return all(q.empty() for q in self.inboxes)


def partition_corpus(corpus: Corpus, workers: int) -> List[List[int]]:
    """Greedy balance: longest document first into the lightest bin.

    Returns one ascending list of document ids per worker.
    """
    if workers < 1:
        raise ValueError("need at least one worker")
    lengths = corpus.doc_lengths().tolist()
    order = sorted(range(len(lengths)), key=lambda d: -lengths[d])
    loads = [0] * workers
    bins: List[List[int]] = [[] for _ in range(workers)]
    for d in order:
        k = min(range(workers), key=lambda b: (loads[b], b))
        bins[k].append(d)
        loads[k] += lengths[d]
    return [sorted(b) for b in bins]


class Worker:
    """One sequential actor owning a document partition."""

    def __init__(self, wid: int, controller: "NomadController", docs: Sequence[int],
                 z: Sequence[int], model: CountModel, stream: UniformStream,
                 route_stream: UniformStream):
        corpus = controller.corpus
        self.id = wid
        self.controller = controller
        self.transport = controller.transport
        self.router = controller.router
        self.docs = list(docs)
        self.stream = stream
        self.route_stream = route_stream
        self.local: collections.deque = collections.deque()

        doc_ptr = corpus.doc_ptr
        positions = [np.arange(doc_ptr[d], doc_ptr[d + 1]) for d in self.docs]
        self.positions = (np.concatenate(positions) if positions
                          else np.empty(0, dtype=np.int64))
        self.z = [z[k] for k in self.positions.tolist()]
        self.n_td: Dict[int, Dict[int, int]] = {d: dict(model.n_td[d]) for d in self.docs}
        self.s_local = list(model.n_t)
        self.s_snap = list(model.n_t)

        # occurrences of each word in this partition, ascending document id
        local_words = corpus.words[self.positions]
        local_docs = corpus.docs[self.positions]
        order = np.argsort(local_words, kind="stable")
        self.occ: Dict[int, List[Tuple[int, int]]] = {}
        for li, w, d in zip(order.tolist(), local_words[order].tolist(), local_docs[order].tolist()):
            self.occ.setdefault(w, []).append((li, d))

        self.kernel = WordOrderKernel(model.hyper, self.n_td, self.s_local)
        self.unpublished_moves = 0
        self.total_moves = 0
        self.seen_moves = 0
        self.processed = 0
        self.thread: Optional[threading.Thread] = None

    # -- token handlers -------------------------------------------------

    def process_word_token(self, token: WordToken) -> WordToken:
        """Resample every local occurrence of ``token.word``."""
        occ = self.occ.get(token.word)
        if not occ:
            return token
        kernel = self.kernel
        z = self.z
        stream = self.stream
        kernel.begin_word(token.counts)
        moves = 0
        for li, d in occ:
            old = z[li]
            new = kernel.resample(d, old, stream)
            if new != old:
                z[li] = new
                moves += 1
        kernel.end_word()
        self.unpublished_moves += moves
        self.total_moves += moves
        return token

    def merge_sum_token(self, token: SumToken) -> SumToken:
        """Fold local effort into the global totals and resync the shadow."""
        s, s_local, s_snap = token.counts, self.s_local, self.s_snap
        for t in range(len(s)):
            s[t] += s_local[t] - s_snap[t]
        changed = [t for t in range(len(s)) if s_local[t] != s[t]]
        # in place: the kernel holds a reference to s_local
        s_local[:] = s
        self.s_snap = list(s)
        self.kernel.refresh(changed)
        token.published_moves += self.unpublished_moves
        self.unpublished_moves = 0
        self.seen_moves = token.published_moves
        return token

    # -- loop -----------------------------------------------------------

    def _acquire(self, token) -> None:
        if token.owner is not None:
            self.controller.violations.append((self.id, token))
        token.owner = self.id
        self.controller.census_acquire()

    def _send(self, dest: int, token) -> None:
        token.owner = None
        self.transport.send(dest, token)

    def run(self) -> None:
        try:
            self._loop()
        except BaseException as exc:  # noqa: BLE001 -- reported to the controller
            log.exception("worker %d failed", self.id)
            self.controller.fail(exc)

    def _loop(self) -> None:
        transport, local, ctl = self.transport, self.local, self.controller
        while True:
            msg = transport.poll(self.id)
            while msg is not None:
                local.append(msg)
                msg = transport.poll(self.id)
            if not local:
                local.append(transport.recv(self.id))
                continue
            msg = local.popleft()
            if msg is STOP:
                return
            if msg is BEGIN_EPOCH:
                self.kernel.reset()
                continue
            self._acquire(msg)
            if isinstance(msg, WordToken):
                self.process_word_token(msg)
                msg.visits += 1
                self.processed += 1
                nxt = self.router.next(self.id, self.route_stream)
                if msg.visits >= ctl.visit_target:
                    msg.home = nxt
                    msg.owner = None
                    ctl.park(msg)
                else:
                    self._send(nxt, msg)
            elif isinstance(msg, SumToken):
                self.merge_sum_token(msg)
                self._forward_sum(msg)
            else:
                raise ContractError(f"unexpected message {msg!r}")

    def _forward_sum(self, token: SumToken) -> None:
        ctl = self.controller
        p = self.router.workers
        if token.final_hops == 0 and ctl.quiescing.is_set():
            # every word token is parked, so this merge starts the final lap
            token.final_hops = p
        if token.final_hops:
            token.final_hops -= 1
            if token.final_hops == 0:
                token.owner = None
                ctl.park_sum(token)
            else:
                self._send((self.id + 1) % p, token)
        else:
            self._send(self.router.next(self.id, self.route_stream), token)


class NomadController:
    """Sets up workers, releases tokens epoch by epoch, and snapshots the
    global state whenever the system is quiescent."""

    def __init__(self, corpus: Corpus, hyper: HyperParams, workers: int, seed: int = 0,
                 routing: str = RING, z: Optional[List[int]] = None,
                 model: Optional[CountModel] = None):
        if workers < 1:
            raise ValueError("need at least one worker")
        if z is None:
            z, model = init_assignments(corpus, hyper, seed)
        elif model is None:
            model = CountModel.from_assignments(corpus, z, hyper)
        self.corpus = corpus
        self.hyper = hyper
        self.p = workers
        self.seed = seed
        self.router = Router(workers, routing)
        self.transport = Transport(workers)
        self.partitions = partition_corpus(corpus, workers)
        self.visit_target = 0
        self.epochs_done = 0
        self.quiescing = threading.Event()
        self.failed = threading.Event()
        self.errors: List[BaseException] = []
        self.violations: list = []
        self._parked: "queue.SimpleQueue" = queue.SimpleQueue()
        self._parked_sum: "queue.SimpleQueue" = queue.SimpleQueue()
        self._acquisitions = 0
        self._lock = threading.Lock()

        streams = spawn_streams(seed, workers, _SAMPLING)
        routes = spawn_streams(seed, workers, _ROUTING)
        self.workers = [Worker(l, self, self.partitions[l], z, model, streams[l], routes[l])
                        for l in range(workers)]

        # deal word tokens round-robin by descending frequency
        freq = corpus.word_frequencies().tolist()
        by_freq = sorted(range(corpus.vocab_size), key=lambda j: -freq[j])
        self.word_tokens: List[WordToken] = [None] * corpus.vocab_size
        for k, j in enumerate(by_freq):
            self.word_tokens[j] = WordToken(j, dict(model.n_tw[j]), home=k % workers)
        self.sum_token = SumToken(list(model.n_t))
        self._held = list(self.word_tokens)
        self._held_sum: Optional[SumToken] = self.sum_token
        self._started = False

    # -- callbacks from workers -----------------------------------------

    def park(self, token: WordToken) -> None:
        self._parked.put(token)

    def park_sum(self, token: SumToken) -> None:
        self._parked_sum.put(token)

    def fail(self, exc: BaseException) -> None:
        self.errors.append(exc)
        self.failed.set()

    def census_acquire(self) -> None:
        with self._lock:
            self._acquisitions += 1

    # -- orchestration --------------------------------------------------

    def start(self) -> None:
        if self._started:
            return
        for w in self.workers:
            w.thread = threading.Thread(target=w.run, name=f"nomad-worker-{w.id}", daemon=True)
            w.thread.start()
        self._started = True

    def _wait(self, q: "queue.SimpleQueue"):
        while True:
            if self.failed.is_set():
                self.shutdown()
                raise self.errors[0]
            try:
                return q.get(timeout=0.05)
            except queue.Empty:
                continue

    def run_epoch(self) -> float:
        """Let every word token complete one circulation, then quiesce.

        Returns the wall time of the epoch in seconds.
        """
        self.start()
        t0 = time.perf_counter()
        self.epochs_done += 1
        self.visit_target = self.epochs_done * self.p
        for l in range(self.p):
            self.transport.send(l, BEGIN_EPOCH)
        self.transport.send(0, self._held_sum)
        self._held_sum = None
        for token in sorted(self._held, key=lambda t: (t.home, t.word)):
            self.transport.send(token.home, token)
        released = len(self._held)
        self._held = []
        for _ in range(released):
            self._held.append(self._wait(self._parked))
        self.quiescing.set()
        self._held_sum = self._wait(self._parked_sum)
        self.quiescing.clear()
        return time.perf_counter() - t0

    def is_quiescent(self) -> bool:
        return (self._held_sum is not None and len(self._held) == len(self.word_tokens)
                and self.transport.idle() and all(not w.local for w in self.workers))

    def census(self) -> Dict[str, int]:
        """Where the tokens are; only meaningful at quiescence."""
        return {"parked_words": len(self._held),
                "parked_sum": int(self._held_sum is not None),
                "in_queues": sum(len(w.local) for w in self.workers),
                "acquisitions": self._acquisitions,
                "violations": len(self.violations)}

    def snapshot(self) -> Tuple[List[int], CountModel]:
        """Assemble global assignments and counts.  Requires quiescence."""
        if not self.is_quiescent():
            raise ContractError("snapshot requested while tokens are in flight")
        z = [0] * self.corpus.num_tokens
        model = CountModel(self.hyper, self.corpus.num_docs)
        for w in self.workers:
            for k, t in zip(w.positions.tolist(), w.z):
                z[k] = t
            for d, counts in w.n_td.items():
                model.n_td[d] = dict(counts)
        for token in self.word_tokens:
            model.n_tw[token.word] = dict(token.counts)
        model.n_t = list(self._held_sum.counts)
        model.check_invariants()
        return z, model

    def staleness_report(self) -> List[Tuple[int, int]]:
        """Per worker: (L1 distance of its shadow from the true totals,
        moves published since its last sum-token visit).  At quiescence the
        first never exceeds twice the second."""
        truth = self._held_sum.counts
        total = self._held_sum.published_moves
        return [(sum(abs(a - b) for a, b in zip(w.s_local, truth)), total - w.seen_moves)
                for w in self.workers]

    def shutdown(self) -> None:
        if not self._started:
            return
        for l in range(self.p):
            self.transport.send(l, STOP)
        for w in self.workers:
            if w.thread is not None:
                w.thread.join(timeout=5)
        self._started = False

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()


@dataclass
class ParallelResult:
    z: List[int]
    model: CountModel
    trace: TrainTrace
    controller: NomadController


def run_parallel(corpus: Corpus, hyper: HyperParams, workers: int, epochs: int,
                 seed: int = 0, routing: str = RING, on_record=None,
                 check_counts: bool = False, z: Optional[List[int]] = None,
                 start_epoch: int = 0) -> ParallelResult:
    """Train with ``workers`` nomad workers for ``epochs`` circulations.

    The likelihood is evaluated on the quiescent snapshot after each epoch.
    With ``check_counts`` every snapshot is also verified against a full
    recount from the assignments.  Passing ``z`` continues from existing
    assignments; records are then numbered from ``start_epoch + 1``.
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    ctl = NomadController(corpus, hyper, workers, seed, routing, z=z)
    z, model = ctl.snapshot()
    trace = TrainTrace(joint_log_likelihood(model))
    try:
        for e in range(1, epochs + 1):
            seconds = ctl.run_epoch()
            z, model = ctl.snapshot()
            if check_counts:
                model.check(corpus, z)
            record = TraceRecord(start_epoch + e, joint_log_likelihood(model), seconds,
                                 corpus.num_tokens / seconds if seconds > 0 else 0.0,
                                 "flda-word", workers, seed)
            trace.append(record)
            if on_record is not None:
                on_record(record)
    finally:
        ctl.shutdown()
    return ParallelResult(z, model, trace, ctl)
