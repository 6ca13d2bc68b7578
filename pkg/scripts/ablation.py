"""Ablations: network variants, optimizer, and the hand-weighted feature mixes.

For each training seed, trains the default, no-embed and regular-q variants
and compares them with cover-only, split-only and weighted scorers on the
held-out faults. Results go to a CSV with one row per (seed, metric).
"""
import argparse
import csv
import io
from pathlib import Path

import numpy as np

from rlfdc.datagen import SyntheticSpec, generate_benchmark
from rlfdc.harness import evaluate
from rlfdc.io import atomic_write_text
from rlfdc.metrics import ScorerSpec
from rlfdc.rl import TrainConfig, train

VARIANTS = {"default": {}, "no-embed": {"no_embed": True}, "regular-q": {"regular_q": True}}


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--faults", type=int, default=50)
    p.add_argument("--train", type=int, default=40)
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out", default="runs/ablation.csv")
    args = p.parse_args()

    programs = generate_benchmark(SyntheticSpec(seed=0), args.faults)
    train_set, held_out = programs[:args.train], programs[args.train:]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "metric", "reward", "acc1", "map"])
    summary: dict[str, list[float]] = {}

    for seed in range(args.seeds):
        specs = {}
        for name, flags in VARIANTS.items():
            model = train(train_set, TrainConfig(seed=seed, optimizer=args.optimizer, **flags))
            specs[name] = ScorerSpec("rlfdc", model=model)
        specs["cover"] = ScorerSpec("cover")
        specs["split"] = ScorerSpec("split")
        specs["weighted"] = ScorerSpec("weighted", alpha=0.5)
        for name, spec in specs.items():
            rep = evaluate(held_out, [spec], args.k)
            label = rep.rows[0].metric
            reward = np.mean([rep.traces[(label, i)].steps[args.k].reward for i in range(len(held_out))])
            row = rep.row(label, args.k)
            w.writerow([seed, name, f"{reward:.6f}", row.acc1, f"{row.map:.6f}"])
            summary.setdefault(name, []).append(reward)

    atomic_write_text(Path(args.out), buf.getvalue())
    for name, values in summary.items():
        print(f"{name:<10} reward@{args.k} mean={np.mean(values):.3f} min={np.min(values):.3f}")


if __name__ == "__main__":
    main()
