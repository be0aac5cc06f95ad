"""Command-line entry points.

``nomadlda train``           run a sampler and write one metrics record per iteration
``nomadlda bench-samplers``  time the four discrete samplers over several T
``nomadlda generate``        write a planted-topic corpus in UCI bag-of-words form

Exit status is 0 on success, 1 for usage errors and 2 for runtime failures.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict
from typing import List, Optional, Sequence

from .bench import SAMPLERS, bench_samplers
from .checkpoint import read_checkpoint, save_state
from .corpus import Corpus, SyntheticSpec, generate_synthetic, parse_uci_bow, write_uci_bow
from .errors import LdaError
from .model import HyperParams
from .nomad import ROUTING_POLICIES, run_parallel
from .rng import spawn_streams
from .serial import ALGORITHMS, TrainerConfig, TrainState, train
from .trace import MetricsWriter, TrainTrace

OUTPUT_DIR_ENV = "NOMADLDA_OUTPUT_DIR"
FIXTURE = (500, 200, 5, 50)
GEN_ALPHA = 0.5
GEN_BETA = 0.1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; usage errors here are 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> List[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return values


def _synthetic(text: str) -> tuple:
    values = _int_list(text)
    if len(values) != 4:
        raise argparse.ArgumentTypeError("--synthetic takes I,J,T,LEN")
    return tuple(values)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nomadlda", description="LDA with F+tree samplers and nomad parallelism")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    tr = sub.add_parser("train", help="train a topic model and write a metrics trace")
    src = tr.add_mutually_exclusive_group()
    src.add_argument("--corpus", help="UCI docword file (optionally .gz)")
    src.add_argument("--synthetic", type=_synthetic, metavar="I,J,T,LEN",
                     help=f"planted corpus; default {','.join(map(str, FIXTURE))} when no corpus is given")
    tr.add_argument("--vocab", help="UCI vocabulary file")
    tr.add_argument("--data-seed", type=int, default=1, help="seed of the synthetic generator")
    tr.add_argument("--algo", choices=ALGORITHMS, default="flda-word")
    tr.add_argument("--topics", type=int, default=1024)
    tr.add_argument("--alpha", type=float, help="default 50/T")
    tr.add_argument("--beta", type=float, default=0.01)
    tr.add_argument("--iters", type=int, default=10)
    tr.add_argument("--workers", "--threads", dest="workers", type=int, default=1,
                    help="more than one worker runs the nomad trainer")
    tr.add_argument("--nomad", action="store_true", help="use the nomad trainer even with one worker")
    tr.add_argument("--routing", choices=ROUTING_POLICIES, default="ring")
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--mh-steps", type=int, default=2)
    tr.add_argument("--output", help=f"trace path, '-' for stdout; default is a file in ${OUTPUT_DIR_ENV} or .")
    tr.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    tr.add_argument("--save-state", help="write a checkpoint after training")
    tr.add_argument("--resume", help="continue from a checkpoint")

    bn = sub.add_parser("bench-samplers", help="time LSearch, BSearch, alias and F+tree")
    bn.add_argument("--sizes", type=_int_list, default=[64, 256, 1024, 4096])
    bn.add_argument("--trials", type=int, default=5)
    bn.add_argument("--samples", type=int, default=2000)
    bn.add_argument("--updates-per-sample", type=float, default=1.0)
    bn.add_argument("--samplers", type=lambda s: s.split(","), default=list(SAMPLERS))
    bn.add_argument("--seed", type=int, default=0)
    bn.add_argument("--output", default="-")
    bn.add_argument("--format", choices=("csv", "jsonl"), default="csv")

    gen = sub.add_parser("generate", help="write a planted-topic corpus")
    gen.add_argument("--synthetic", type=_synthetic, default=FIXTURE, metavar="I,J,T,LEN")
    gen.add_argument("--alpha", type=float, default=GEN_ALPHA)
    gen.add_argument("--beta", type=float, default=GEN_BETA)
    gen.add_argument("--seed", type=int, default=1)
    gen.add_argument("--out-dir", required=True)
    return parser


def _open_sink(path: Optional[str]):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def _default_trace_path(args) -> str:
    directory = os.environ.get(OUTPUT_DIR_ENV) or "."
    p = args.workers if (args.workers > 1 or args.nomad) else 1
    ext = "csv" if args.format == "csv" else "jsonl"
    return os.path.join(directory, f"trace-{args.algo}-p{p}-s{args.seed}.{ext}")


def _load_corpus(args) -> Corpus:
    if args.corpus is not None:
        return parse_uci_bow(args.corpus, args.vocab)
    if args.vocab is not None:
        raise UsageError("--vocab needs --corpus")
    I, J, T, L = args.synthetic or FIXTURE
    spec = SyntheticSpec(I, J, T, L, GEN_ALPHA, GEN_BETA, args.data_seed)
    return generate_synthetic(spec)[0]


def _validate_train(args) -> None:
    if args.topics < 1:
        raise UsageError("--topics must be >= 1")
    if args.iters < 1:
        raise UsageError("--iters must be >= 1")
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    if args.mh_steps < 1:
        raise UsageError("--mh-steps must be >= 1")
    for name in ("alpha", "beta"):
        value = getattr(args, name)
        if value is not None and not (value > 0 and math.isfinite(value)):
            raise UsageError(f"--{name} must be positive and finite")
    if (args.workers > 1 or args.nomad) and args.algo != "flda-word":
        raise UsageError("the nomad trainer only runs flda-word")


def cmd_train(args) -> int:
    _validate_train(args)
    corpus = _load_corpus(args)
    alpha = args.alpha if args.alpha is not None else 50.0 / args.topics
    hyper = HyperParams(args.topics, corpus.vocab_size, alpha, args.beta)
    parallel = args.workers > 1 or args.nomad

    ckpt = None
    if args.resume:
        ckpt = read_checkpoint(args.resume)
        h = ckpt.model.hyper
        if (ckpt.model.num_docs, h.vocab_size, len(ckpt.z)) != (
                corpus.num_docs, corpus.vocab_size, corpus.num_tokens):
            raise LdaError("checkpoint does not match the corpus")
        if h.num_topics != args.topics:
            raise LdaError(f"checkpoint has {h.num_topics} topics, --topics is {args.topics}")
        hyper = h
        ckpt.model.check(corpus, ckpt.z)

    path = args.output if args.output is not None else _default_trace_path(args)
    sink, close = _open_sink(path)
    try:
        writer = MetricsWriter(sink, args.format)
        start = ckpt.iteration if ckpt else 0
        if parallel:
            result = run_parallel(corpus, hyper, args.workers, args.iters, args.seed,
                                  args.routing, on_record=writer.write,
                                  z=ckpt.z if ckpt else None, start_epoch=start)
            z, model, stream_state = result.z, result.model, None
            iteration = start + args.iters
        else:
            config = TrainerConfig(args.algo, args.iters, hyper, args.seed, args.mh_steps)
            state = None
            if ckpt is not None:
                stream = spawn_streams(args.seed, 1)[0]
                if ckpt.stream_state is not None:
                    stream.state = ckpt.stream_state
                state = TrainState(ckpt.z, ckpt.model, stream, ckpt.iteration, TrainTrace())
            state = train(corpus, config, state, on_record=writer.write)
            z, model, iteration = state.z, state.model, state.iteration
            stream_state = state.stream.state
    finally:
        if close:
            sink.close()
    if path != "-":
        print(f"wrote {path}", file=sys.stderr)
    if args.save_state:
        save_state(args.save_state, z, model, iteration, stream_state)
    return 0


def cmd_bench(args) -> int:
    unknown = [s for s in args.samplers if s not in SAMPLERS]
    if unknown:
        raise UsageError(f"unknown samplers {unknown}; pick from {list(SAMPLERS)}")
    if args.trials < 1 or args.samples < 1 or args.updates_per_sample < 0:
        raise UsageError("--trials and --samples must be >= 1, --updates-per-sample >= 0")
    records = bench_samplers(args.sizes, args.trials, args.samples,
                             args.updates_per_sample, args.seed, args.samplers)
    sink, close = _open_sink(args.output)
    try:
        rows = [asdict(r) for r in records]
        if args.format == "csv":
            w = csv.DictWriter(sink, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        else:
            for row in rows:
                sink.write(json.dumps(row) + "\n")
        sink.flush()
    finally:
        if close:
            sink.close()
    return 0


def cmd_generate(args) -> int:
    I, J, T, L = args.synthetic
    if args.alpha <= 0 or args.beta <= 0:
        raise UsageError("--alpha and --beta must be positive")
    corpus, phi, _ = generate_synthetic(SyntheticSpec(I, J, T, L, args.alpha, args.beta, args.seed))
    os.makedirs(args.out_dir, exist_ok=True)
    with open(os.path.join(args.out_dir, "docword.txt"), "w") as f:
        write_uci_bow(corpus, f)
    with open(os.path.join(args.out_dir, "vocab.txt"), "w") as f:
        f.write("".join(f"w{j}\n" for j in range(J)))
    with open(os.path.join(args.out_dir, "phi.csv"), "w") as f:
        csv.writer(f, lineterminator="\n").writerows([repr(float(x)) for x in row] for row in phi)
    print(f"wrote {corpus.num_tokens} tokens to {args.out_dir}", file=sys.stderr)
    return 0


COMMANDS = {"train": cmd_train, "bench-samplers": cmd_bench, "generate": cmd_generate}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"nomadlda: error: {exc}", file=sys.stderr)
        return 1
    except (LdaError, OSError, ValueError) as exc:
        print(f"nomadlda: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
