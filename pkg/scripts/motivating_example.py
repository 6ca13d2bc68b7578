"""Print the per-method "score/rank" tables for the 28-statement example.

Two trajectories are replayed: t1..t10 (the learned metric's picks) and
t11..t20 (TfD's picks over that sub-pool). Also shows which candidates tie
for TfD's first pick over the full pool.
"""
import argparse
from pathlib import Path

from rlfdc.coverage import SuiteContext, read_dataset
from rlfdc.harness import select
from rlfdc.metrics import ScorerSpec, make_scorer, tfd
from rlfdc.sbfl import localize

DEFAULT_DATA = Path(__file__).resolve().parent.parent / "tests" / "data" / "motivating_example.json"


def table(ds, picks):
    suite = [0]
    cols = [localize(ds, suite)]
    for t in picks:
        suite.append(t)
        cols.append(localize(ds, suite))
    header = "      " + " ".join(f"{'t' + str(t):>8}" for t in [0, *picks])
    lines = [header]
    for m, name in enumerate(ds.methods):
        cells = " ".join(f"{c.scores[m]:.3f}/{c.ranks[m]:<2}" for c in cols)
        lines.append(f"{name:>5} {cells}")
    return "\n".join(lines)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--data", default=str(DEFAULT_DATA))
    args = p.parse_args()
    ds = read_dataset(args.data)

    print("selected t1..t10")
    print(table(ds, range(1, 11)))
    print("\nselected t11..t20")
    print(table(ds, range(11, 21)))

    ctx = SuiteContext(ds, 0)
    counts = {t: tfd(ds, [0, t], ctx.scope) for t in range(1, 21)}
    best = max(counts.values())
    print(f"\nTfD first pick over t1..t20: {best} groups reached by "
          f"{sorted(t for t, c in counts.items() if c == best)}")
    trace = select(ds, 0, make_scorer(ScorerSpec("tfd")), 10, pool=list(range(11, 21)))
    print(f"TfD greedy order over t11..t20: {trace.selected}")


if __name__ == "__main__":
    main()
