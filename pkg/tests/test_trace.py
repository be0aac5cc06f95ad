import io
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nomadlda.trace import FIELDS, MetricsWriter, TraceRecord, TrainTrace, emit_metrics, read_metrics

HEADER = "iter,loglik,seconds,tokens_per_sec,algorithm,workers,seed"


def records(n):
    return [TraceRecord(i + 1, -1000.0 / (i + 1) - 0.1, 0.25 * (i + 1), 4e5 / 3, "flda-word", 2, 7)
            for i in range(n)]


class TestCsv:
    def test_header_exact(self):
        assert ",".join(FIELDS) == HEADER

    def test_empty_trace_is_header_only(self):
        buf = io.StringIO()
        emit_metrics([], "csv", buf)
        assert buf.getvalue() == HEADER + "\n"

    def test_three_records_four_lines(self):
        buf = io.StringIO()
        emit_metrics(records(3), "csv", buf)
        lines = buf.getvalue().splitlines()
        assert len(lines) == 4
        assert lines[0] == HEADER
        assert lines[1].startswith("1,")

    def test_round_trip(self):
        buf = io.StringIO()
        recs = records(5)
        emit_metrics(recs, "csv", buf)
        buf.seek(0)
        assert read_metrics(buf, "csv") == recs


class TestJsonl:
    def test_empty_trace_is_empty(self):
        buf = io.StringIO()
        emit_metrics([], "jsonl", buf)
        assert buf.getvalue() == ""

    def test_keys(self):
        buf = io.StringIO()
        emit_metrics(records(2), "jsonl", buf)
        rows = [json.loads(line) for line in buf.getvalue().splitlines()]
        assert [list(r) for r in rows] == [list(FIELDS)] * 2

    def test_round_trip(self):
        buf = io.StringIO()
        recs = records(3)
        emit_metrics(recs, "jsonl", buf)
        buf.seek(0)
        assert read_metrics(buf, "jsonl") == recs


class _CountingSink(io.StringIO):
    def __init__(self):
        super().__init__()
        self.flushes = 0

    def flush(self):
        self.flushes += 1
        super().flush()


@pytest.mark.parametrize("fmt", ["csv", "jsonl"])
def test_flush_per_record(fmt):
    sink = _CountingSink()
    writer = MetricsWriter(sink, fmt)
    before = sink.flushes
    for rec in records(4):
        writer.write(rec)
    assert sink.flushes - before == 4


def test_unknown_format():
    with pytest.raises(ValueError):
        MetricsWriter(io.StringIO(), "xml")


def test_io_errors_propagate():
    sink = io.StringIO()
    sink.close()
    with pytest.raises(ValueError):
        emit_metrics(records(1), "jsonl", sink)


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=10))
def test_float_round_trip(values):
    recs = [TraceRecord(i, v, abs(v), abs(v), "sparse", 1, 0) for i, v in enumerate(values)]
    for fmt in ("csv", "jsonl"):
        buf = io.StringIO()
        emit_metrics(recs, fmt, buf)
        buf.seek(0)
        assert read_metrics(buf, fmt) == recs


def test_train_trace_container():
    trace = TrainTrace(-5.0)
    for r in records(3):
        trace.append(r)
    assert len(trace) == 3
    assert trace[0].iter == 1
    assert trace.logliks == [r.loglik for r in records(3)]
    assert records(1)[0].untimed() == (1, records(1)[0].loglik, "flda-word", 2, 7)
