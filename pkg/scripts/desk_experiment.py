"""Desk-scale comparison of the learned metric against the baselines.

Generates a synthetic benchmark, trains on the first faults, then writes an
acc@n/mAP report over the held-out ones for every metric.
"""
import argparse
import logging
import time
from pathlib import Path

import numpy as np

from rlfdc.datagen import SyntheticSpec, generate_benchmark
from rlfdc.harness import evaluate
from rlfdc.io import atomic_write_text
from rlfdc.metrics import DEFAULT_ALPHA, ScorerSpec
from rlfdc.rl import TrainConfig, save_model, train

log = logging.getLogger("desk")


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--faults", type=int, default=50)
    p.add_argument("--train", type=int, default=40, help="faults used for training")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--random-runs", type=int, default=20)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="runs/desk")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    out = Path(args.out)
    programs = generate_benchmark(SyntheticSpec(seed=args.seed), args.faults)
    train_set, held_out = programs[:args.train], programs[args.train:]

    start = time.perf_counter()
    model = train(train_set, TrainConfig(seed=args.seed, optimizer=args.optimizer))
    log.info("trained on %d faults in %.1fs", len(train_set), time.perf_counter() - start)
    save_model(model, out / "model.json")

    specs = [ScorerSpec("rlfdc", model=model), ScorerSpec("tfd"), ScorerSpec("ddu"),
             ScorerSpec("entbug"), ScorerSpec("fdg", alpha=DEFAULT_ALPHA)]
    report = evaluate(held_out, specs, args.k, jobs=args.jobs)
    atomic_write_text(out / "report.csv", report.to_csv())

    def mean_reward(rep, label):
        return np.mean([rep.traces[(label, i)].steps[args.k].reward for i in range(len(held_out))])

    print(f"{'metric':<10} {'reward@k':>9} {'acc@1':>6} {'acc@5':>6} {'mAP':>6}")
    for spec in specs:
        label = spec.kind if spec.alpha is None else f"{spec.kind}@{spec.alpha:g}"
        row = report.row(label, args.k)
        print(f"{label:<10} {mean_reward(report, label):9.3f} {row.acc1:6d} {row.acc5:6d} {row.map:6.3f}")

    rewards, maps = [], []
    for seed in range(args.random_runs):
        rep = evaluate(held_out, [ScorerSpec("random", seed=seed)], args.k)
        rewards.append(mean_reward(rep, "random"))
        maps.append(rep.row("random", args.k).map)
    print(f"{'random':<10} {np.mean(rewards):9.3f} {'':>6} {'':>6} {np.mean(maps):6.3f}"
          f"   (mean of {args.random_runs} seeds)")


if __name__ == "__main__":
    main()
