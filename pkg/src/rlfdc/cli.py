"""Command-line entry point: ``rlfdc <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .coverage import DatasetError, SuiteContext, candidate_pool, read_dataset
from .datagen import SyntheticSpec, write_benchmark
from .generation import GenConfig, ga_generate, label_generated
from .harness import evaluate, select
from .io import atomic_write_text
from .metrics import DEFAULT_ALPHA, KINDS, ScorerSpec, ddu, entbug, make_scorer, tfd
from .rl import ModelError, TrainConfig, load_model, save_model, train

log = logging.getLogger("rlfdc")

VARIANTS = {"default": {}, "no-embed": {"no_embed": True}, "regular-q": {"regular_q": True}}


class CommandError(Exception):
    pass


def _range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition("-")
    try:
        return int(lo), int(hi or lo)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or LO-HI, got {text!r}") from None


def _dataset_files(path: str) -> list[Path]:
    p = Path(path)
    if p.is_dir():
        files = sorted(f for f in p.glob("*.json") if f.name != "manifest.json")
        if not files:
            raise CommandError(f"no dataset files in {p}")
        return files
    if not p.exists():
        raise CommandError(f"{p} does not exist")
    return [p]


def _load_all(path: str):
    return [read_dataset(f) for f in _dataset_files(path)]


def _load_one(path: str):
    files = _dataset_files(path)
    if len(files) != 1:
        raise CommandError("expected a single dataset file")
    return read_dataset(files[0])


def _scorer_spec(kind: str, args) -> ScorerSpec:
    if kind not in KINDS:
        raise CommandError(f"unknown metric {kind!r}; choose from {', '.join(KINDS)}")
    alpha = None
    if kind in ("fdg", "weighted"):
        alpha = DEFAULT_ALPHA if args.alpha is None else args.alpha
    model = None
    if kind == "rlfdc":
        if not args.model:
            raise CommandError("metric rlfdc needs --model")
        model = load_model(args.model)
    seed = args.seed if kind == "random" else None
    return ScorerSpec(kind, alpha=alpha, model=model, seed=seed)


def _failing(ds) -> int:
    if not ds.initial_failing:
        raise CommandError("dataset lists no initial failing test")
    return ds.initial_failing[0]


# ---------------------------------------------------------------------------
# subcommands; each returns the number of artifacts written


def cmd_bench(args) -> int:
    lo, hi = args.stmts
    spec = SyntheticSpec(methods=args.methods, stmts_min=lo, stmts_max=hi, tests=args.tests,
                         faults=args.bugs, trigger_prob=args.trigger_prob, seed=args.seed)
    return len(write_benchmark(spec, args.faults, args.out))


def cmd_train(args) -> int:
    datasets = _load_all(args.data)
    config = TrainConfig(epochs=args.epochs, seed=args.seed, steps=args.k,
                         optimizer=args.optimizer, lr=args.lr, **VARIANTS[args.variant])
    model = train(datasets, config)
    save_model(model, args.out)
    return 1


def cmd_select(args) -> int:
    ds = _load_one(args.data)
    trace = select(ds, _failing(ds), make_scorer(_scorer_spec(args.metric, args)), args.k)
    atomic_write_text(args.trace, trace.to_csv())
    return 1


def cmd_generate(args) -> int:
    ds = _load_one(args.data)
    config = GenConfig(fitness=_scorer_spec(args.fitness, args), population=args.pop,
                       generations=args.generations, seed=args.seed, output_count=args.count)
    result = ga_generate(ds, _failing(ds), config)
    tests = label_generated(ds, result.vectors, args.trigger_prob, args.seed)
    doc = {"version": 1, "tests": tests}
    atomic_write_text(args.out, json.dumps(doc, indent=1) + "\n")
    return 1


def cmd_metric(args) -> int:
    ds = _load_one(args.data)
    failing = _failing(ds)
    ctx = SuiteContext(ds, failing, args.suite or ())
    kind = args.metric
    if kind in ("tfd", "ddu", "entbug") and not args.per_candidate:
        fn = {"tfd": tfd, "ddu": ddu, "entbug": entbug}[kind]
        print(f"metric={kind} suite={','.join(map(str, ctx.tests))} value={fn(ds, ctx.tests, ctx.scope):.6f}")
        return 0
    scorer = make_scorer(_scorer_spec(kind, args))
    pool = [t for t in candidate_pool(ds, failing) if t not in ctx]
    for t, v in zip(pool, scorer.score_tests(ctx, pool)):
        print(f"metric={kind} test={t} value={v:.6f}")
    return 0


def cmd_eval(args) -> int:
    datasets = _load_all(args.data)
    specs = [_scorer_spec(k.strip(), args) for k in args.metrics.split(",") if k.strip()]
    report = evaluate(datasets, specs, args.k, jobs=args.jobs)
    for index, reason in report.skipped:
        print(f"skipped fault={index} reason={reason!r}", file=sys.stderr)
    atomic_write_text(args.report, report.to_csv())
    return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rlfdc", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=True):
        sp.add_argument("--seed", type=int, default=0)
        if data:
            sp.add_argument("--data", required=True, help="dataset file or directory")

    def scoring(sp, flag="--metric"):
        sp.add_argument(flag, required=True, choices=KINDS)
        sp.add_argument("--model", help="trained model file (rlfdc)")
        sp.add_argument("--alpha", type=float, default=None, help=f"fdg/weighted weight (default {DEFAULT_ALPHA})")

    sp = sub.add_parser("bench", help="generate a synthetic benchmark")
    common(sp, data=False)
    sp.add_argument("--faults", type=int, required=True, help="number of faulty programs")
    sp.add_argument("--bugs", type=int, default=1, help="planted faults per program")
    sp.add_argument("--methods", type=int, default=20)
    sp.add_argument("--stmts", type=_range, default=(3, 8), help="statements per method, N or LO-HI")
    sp.add_argument("--tests", type=int, default=60)
    sp.add_argument("--trigger-prob", type=float, default=0.8)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("train", help="train the Q network")
    common(sp)
    sp.add_argument("--epochs", type=int, default=30)
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--variant", choices=sorted(VARIANTS), default="default")
    sp.add_argument("--optimizer", choices=("sgd", "adam"), default=TrainConfig.optimizer)
    sp.add_argument("--lr", type=float, default=TrainConfig.lr)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("select", help="greedy metric-guided test selection")
    common(sp)
    scoring(sp)
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--trace", required=True)
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("generate", help="FDC-guided evolutionary generation")
    common(sp)
    scoring(sp, "--fitness")
    sp.add_argument("--generations", type=int, default=60)
    sp.add_argument("--pop", type=int, default=20)
    sp.add_argument("--count", type=int, default=10)
    sp.add_argument("--trigger-prob", type=float, default=0.8)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("metric", help="print suite-level or per-candidate metric values")
    common(sp)
    scoring(sp)
    sp.add_argument("--suite", type=lambda s: [int(x) for x in s.split(",") if x],
                    help="comma-separated test ids already selected")
    sp.add_argument("--per-candidate", action="store_true",
                    help="score candidates for suite-level metrics too")
    sp.set_defaults(func=cmd_metric)

    sp = sub.add_parser("eval", help="multi-metric acc@n / mAP sweep")
    common(sp)
    sp.add_argument("--metrics", required=True, help="comma-separated metric kinds")
    sp.add_argument("--model")
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--k", type=int, default=10)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--report", required=True)
    sp.set_defaults(func=cmd_eval)
    return p


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        artifacts = args.func(args)
    except (CommandError, DatasetError, ModelError, ValueError, RuntimeError, OSError) as exc:
        print(f"rlfdc {args.command}: error: {exc}", file=sys.stderr)
        return 1
    print(f"subcommand={args.command} status=ok artifacts={artifacts} seed={args.seed}")
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
