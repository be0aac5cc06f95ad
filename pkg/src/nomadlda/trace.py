"""Per-iteration training metrics and their CSV / JSON-lines encodings."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from typing import IO, Iterable, List, Optional

FIELDS = ("iter", "loglik", "seconds", "tokens_per_sec", "algorithm", "workers", "seed")
TIMING_FIELDS = ("seconds", "tokens_per_sec")


@dataclass
class TraceRecord:
    iter: int
    loglik: float
    seconds: float
    tokens_per_sec: float
    algorithm: str
    workers: int
    seed: int

    def untimed(self) -> tuple:
        return (self.iter, self.loglik, self.algorithm, self.workers, self.seed)


@dataclass
class TrainTrace:
    """One record per completed iteration plus the score before training."""

    initial_loglik: Optional[float] = None
    records: List[TraceRecord] = field(default_factory=list)

    def append(self, record: TraceRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def logliks(self) -> List[float]:
        return [r.loglik for r in self.records]


class MetricsWriter:
    """Writes records as they arrive and flushes after each one."""

    def __init__(self, sink: IO[str], fmt: str = "csv"):
        if fmt not in ("csv", "jsonl"):
            raise ValueError(f"unknown metrics format {fmt!r}")
        self.sink = sink
        self.fmt = fmt
        if fmt == "csv":
            self._csv = csv.writer(sink, lineterminator="\n")
            self._csv.writerow(FIELDS)
            sink.flush()

    def write(self, record: TraceRecord) -> None:
        row = asdict(record)
        if self.fmt == "csv":
            self._csv.writerow([_fmt(row[k]) for k in FIELDS])
        else:
            self.sink.write(json.dumps({k: row[k] for k in FIELDS}) + "\n")
        self.sink.flush()


def _fmt(value) -> str:
    # repr round-trips floats exactly
    return repr(value) if isinstance(value, float) else str(value)


def emit_metrics(trace: Iterable[TraceRecord], fmt: str, sink: IO[str]) -> None:
    writer = MetricsWriter(sink, fmt)
    for record in trace:
        writer.write(record)


def read_metrics(stream: IO[str], fmt: str = "csv") -> List[TraceRecord]:
    """Parse records written by :func:`emit_metrics`."""
    if fmt == "csv":
        rows = list(csv.DictReader(stream))
    else:
        rows = [json.loads(line) for line in stream if line.strip()]
    return [TraceRecord(int(r["iter"]), float(r["loglik"]), float(r["seconds"]),
                        float(r["tokens_per_sec"]), str(r["algorithm"]),
                        int(r["workers"]), int(r["seed"])) for r in rows]
