"""Binary checkpoints of a Gibbs chain.

Layout (little-endian)::

    magic      4s   b"NLDA"
    version    u8
    I, J, T    3 x u32
    N          u64   number of tokens
    iteration  u64
    alpha      f64
    beta       f64
    z          N x i32
    n_t        T x i64
    n_td       I x u32 nnz, then u64 total, then total x (u32 topic, u32 count)
    n_tw       J x u32 nnz, then u64 total, then total x (u32 topic, u32 count)
    stream     u32 length, then that many bytes of JSON (empty when absent)

Sparse pairs are stored in each dict's iteration order so that a restored
chain replays exactly.
"""
from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .errors import CheckpointError, ConsistencyError
from .model import CountModel, HyperParams

MAGIC = b"NLDA"
VERSION = 1
_HEADER = struct.Struct("<4sBIIIQQdd")


@dataclass
class Checkpoint:
    z: List[int]
    model: CountModel
    iteration: int = 0
    stream_state: Optional[dict] = None


def _pack_sparse(rows: List[Dict[int, int]]) -> bytes:
    nnz = np.fromiter((len(m) for m in rows), dtype="<u4", count=len(rows))
    flat = np.fromiter((x for m in rows for pair in m.items() for x in pair),
                       dtype="<u4", count=2 * int(nnz.sum()))
    return nnz.tobytes() + struct.pack("<Q", int(nnz.sum())) + flat.tobytes()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise CheckpointError(f"truncated checkpoint: need {n} bytes at offset {self.pos}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def array(self, dtype: str, count: int) -> np.ndarray:
        size = np.dtype(dtype).itemsize
        return np.frombuffer(self.take(size * count), dtype=dtype)

    def sparse(self, rows: int) -> List[Dict[int, int]]:
        nnz = self.array("<u4", rows).astype(np.int64)
        (total,) = struct.unpack("<Q", self.take(8))
        if total != int(nnz.sum()):
            raise CheckpointError("sparse block length disagrees with its row sizes")
        flat = self.array("<u4", 2 * total).tolist()
        out = []
        k = 0
        for n in nnz.tolist():
            out.append(dict(zip(flat[k:k + 2 * n:2], flat[k + 1:k + 2 * n:2])))
            k += 2 * n
        return out


def save_state(path, z, model: CountModel, iteration: int = 0,
               stream_state: Optional[dict] = None) -> None:
    h = model.hyper
    parts = [
        _HEADER.pack(MAGIC, VERSION, model.num_docs, h.vocab_size, h.num_topics,
                     len(z), iteration, h.alpha, h.beta),
        np.asarray(z, dtype="<i4").tobytes(),
        np.asarray(model.n_t, dtype="<i8").tobytes(),
        _pack_sparse(model.n_td),
        _pack_sparse(model.n_tw),
    ]
    blob = json.dumps(stream_state).encode() if stream_state is not None else b""
    parts.append(struct.pack("<I", len(blob)) + blob)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as f:
        f.write(b"".join(parts))
    os.replace(tmp, path)


def read_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        r = _Reader(f.read())
    magic, version, I, J, T, N, iteration, alpha, beta = _HEADER.unpack(r.take(_HEADER.size))
    if magic != MAGIC:
        raise CheckpointError("not a nomadlda checkpoint")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        hyper = HyperParams(T, J, alpha, beta)
    except ValueError as exc:
        raise CheckpointError(str(exc)) from None
    z = r.array("<i4", N).tolist()
    model = CountModel(hyper, 0)
    model.n_t = r.array("<i8", T).tolist()
    model.n_td = r.sparse(I)
    model.n_tw = r.sparse(J)
    (n,) = struct.unpack("<I", r.take(4))
    try:
        stream_state = json.loads(r.take(n)) if n else None
    except ValueError:
        raise CheckpointError("corrupt stream state") from None
    if r.pos != len(r.data):
        raise CheckpointError("trailing bytes after checkpoint")
    if any(not 0 <= t < T for t in z) or sum(model.n_t) != N:
        raise CheckpointError("assignments disagree with the topic totals")
    try:
        model.check_invariants()
    except ConsistencyError as exc:
        raise CheckpointError(f"inconsistent counts: {exc}") from None
    return Checkpoint(z, model, iteration, stream_state)


def load_state(path):
    """Return ``(z, model)`` from a checkpoint."""
    ckpt = read_checkpoint(path)
    return ckpt.z, ckpt.model
