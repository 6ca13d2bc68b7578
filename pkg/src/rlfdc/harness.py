"""Greedy metric-guided test selection and the multi-metric evaluation sweep."""
from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .coverage import Dataset, SuiteContext, candidate_pool
from .metrics import Scorer, ScorerSpec, make_scorer
from .sbfl import (Ranking, acc_at_n, best_buggy_rank, buggy_methods, localize,
                   mean_average_precision, reward)

log = logging.getLogger(__name__)

ACC_LEVELS = (1, 3, 5, 10)
REPORT_HEADER = ("metric", "k", "acc1", "acc3", "acc5", "acc10", "map")


@dataclass
class TraceStep:
    k: int
    selected: int | None
    ranking: Ranking
    best_rank: int | None
    reward: float | None

    @property
    def method_scores(self) -> np.ndarray:
        return self.ranking.scores


@dataclass
class SelectionTrace:
    failing_test: int
    steps: list[TraceStep] = field(default_factory=list)

    @property
    def selected(self) -> list[int]:
        return [s.selected for s in self.steps if s.selected is not None]

    def suite(self, k: int) -> list[int]:
        return [self.failing_test, *self.selected[:k]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "selected", "best_rank", "reward", "method_scores"])
        for s in self.steps:
            w.writerow([s.k, "" if s.selected is None else s.selected,
                        "" if s.best_rank is None else s.best_rank,
                        "" if s.reward is None else f"{s.reward:.6f}",
                        ";".join(f"{x:.6f}" for x in s.method_scores)])
        return buf.getvalue()


class SelectionError(ValueError):
    pass


def select(dataset: Dataset, failing_test: int, scorer: Scorer, k: int,
           pool: list[int] | None = None) -> SelectionTrace:
    """K greedy picks by ``scorer``; ties go to the lowest test id.

    The FL ranking after each pick uses the outcomes of the suite's tests,
    which amounts to labeling each test once it has been selected. Scorers
    other than FDG never read those outcomes.
    """
    if dataset.outcome(failing_test) != "fail":
        raise SelectionError(f"test {failing_test} is not a failing test")
    pool = sorted(candidate_pool(dataset, failing_test) if pool is None else pool)
    if failing_test in pool:
        raise SelectionError("the failing test cannot be a candidate")
    if len(pool) < k:
        raise SelectionError(f"only {len(pool)} candidates for {k} selections")
    buggy = buggy_methods(dataset) if dataset.faults else None

    ctx = SuiteContext(dataset, failing_test)
    ranking = localize(dataset, ctx.tests, ctx.scope)
    init_rank = best_buggy_rank(ranking, buggy) if buggy else None
    trace = SelectionTrace(failing_test)
    trace.steps.append(TraceStep(0, None, ranking, init_rank, 0.0 if buggy else None))
    for step in range(1, k + 1):
        scores = scorer.score_tests(ctx, pool)
        choice = int(np.argmax(scores))
        t_sel = pool.pop(choice)
        ctx.add(t_sel)
        ranking = localize(dataset, ctx.tests, ctx.scope)
        rank = best_buggy_rank(ranking, buggy) if buggy else None
        trace.steps.append(TraceStep(step, t_sel, ranking, rank,
                                     reward(init_rank, rank) if buggy else None))
    return trace


# ---------------------------------------------------------------------------
# evaluation sweep


@dataclass(frozen=True)
class ReportRow:
    metric: str
    k: int
    acc1: int
    acc3: int
    acc5: int
    acc10: int
    map: float


@dataclass
class EvalReport:
    rows: list[ReportRow]
    skipped: list[tuple[int, str]] = field(default_factory=list)  # (fault index, reason)
    traces: dict[tuple[str, int], SelectionTrace] = field(default_factory=dict, repr=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in self.rows:
            w.writerow([r.metric, r.k, r.acc1, r.acc3, r.acc5, r.acc10, f"{r.map:.6f}"])
        return buf.getvalue()

    def row(self, metric: str, k: int) -> ReportRow:
        for r in self.rows:
            if r.metric == metric and r.k == k:
                return r
        raise KeyError((metric, k))


def metric_label(spec: ScorerSpec) -> str:
    if spec.alpha is not None:
        return f"{spec.kind}@{spec.alpha:g}"
    return spec.kind


def fault_spec(spec: ScorerSpec, fault_index: int) -> ScorerSpec:
    """A per-fault copy; random scorers get an independent derived seed."""
    if spec.kind != "random":
        return spec
    seed = int(np.random.SeedSequence([spec.seed, fault_index]).generate_state(1)[0])
    return replace(spec, seed=seed)


def precheck(dataset: Dataset, k: int) -> str | None:
    """Reason a fault cannot be evaluated, or None."""
    if not dataset.faults:
        return "no labeled faults"
    if not dataset.initial_failing:
        return "no initial failing test"
    failing = dataset.initial_failing[0]
    if not dataset.coverage[failing].any():
        return "initial failing test covers no element"
    if len(candidate_pool(dataset, failing)) < k:
        return f"fewer than {k} candidate tests"
    return None


def _run_fault(args) -> tuple[int, dict[str, SelectionTrace] | str]:
    index, dataset, specs, k = args
    reason = precheck(dataset, k)
    if reason is not None:
        return index, reason
    failing = dataset.initial_failing[0]
    traces = {}
    for spec in specs:
        scorer = make_scorer(fault_spec(spec, index))
        traces[metric_label(spec)] = select(dataset, failing, scorer, k)
    return index, traces


def evaluate(datasets: list[Dataset], specs: list[ScorerSpec], k: int = 10,
             jobs: int = 1) -> EvalReport:
    for spec in specs:
        spec.validate()
    labels = [metric_label(s) for s in specs]
    if len(set(labels)) != len(labels):
        raise ValueError("duplicate metric in the sweep")
    tasks = [(i, ds, specs, k) for i, ds in enumerate(datasets)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_fault, tasks))
    else:
        results = [_run_fault(t) for t in tasks]
    results.sort(key=lambda r: r[0])

    report = EvalReport(rows=[])
    ok = []
    for index, res in results:
        if isinstance(res, str):
            log.warning("skipping fault %d: %s", index, res)
            report.skipped.append((index, res))
        else:
            ok.append(index)
            for label, trace in res.items():
                report.traces[(label, index)] = trace
    for label in labels:
        for step in range(k + 1):
            ranks, rankings, buggy = [], [], []
            for index in ok:
                s = report.traces[(label, index)].steps[step]
                ranks.append(s.best_rank)
                rankings.append(s.ranking)
                buggy.append(buggy_methods(datasets[index]))
            accs = [acc_at_n(ranks, n) for n in ACC_LEVELS]
            report.rows.append(ReportRow(label, step, *accs,
                                         mean_average_precision(rankings, buggy)))
    return report
