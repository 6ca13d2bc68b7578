"""Ochiai scoring aggregated to methods, max-tie-break ranking and FL measures."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .coverage import Dataset


class NoFailureSignal(ValueError):
    """The scored tests contain no failing test."""


@dataclass(frozen=True)
class SpectrumCounts:
    ef: np.ndarray
    ep: np.ndarray
    nf: np.ndarray
    np: np.ndarray


def spectrum_counts(dataset: Dataset, test_subset: Iterable[int]) -> SpectrumCounts:
    """Per-element counts over the labeled tests of ``test_subset``."""
    ids = sorted(set(int(t) for t in test_subset))
    fail = [t for t in ids if dataset.outcome(t) == "fail"]
    passing = [t for t in ids if dataset.outcome(t) == "pass"]
    cov = dataset.coverage
    ef = cov[fail].sum(axis=0) if fail else np.zeros(dataset.num_elements, dtype=np.int64)
    ep = cov[passing].sum(axis=0) if passing else np.zeros(dataset.num_elements, dtype=np.int64)
    return SpectrumCounts(ef=ef, ep=ep, nf=len(fail) - ef, np=len(passing) - ep)


def ochiai(ef, ep, nf) -> np.ndarray:
    """ef / sqrt((ef + nf)(ef + ep)), with 0 wherever ef or the denominator is 0."""
    ef = np.asarray(ef, dtype=float)
    denom = np.sqrt((ef + np.asarray(nf, dtype=float)) * (ef + np.asarray(ep, dtype=float)))
    return np.divide(ef, denom, out=np.zeros(np.broadcast(ef, denom).shape), where=(denom > 0) & (ef > 0))


def ochiai_statement_scores(dataset: Dataset, test_subset: Iterable[int]) -> np.ndarray:
    test_subset = list(test_subset)
    if not test_subset:
        raise ValueError("empty test subset")
    counts = spectrum_counts(dataset, test_subset)
    if not np.any(counts.ef + counts.nf):
        raise NoFailureSignal("no failing test in the scored subset")
    return ochiai(counts.ef, counts.ep, counts.nf)


def aggregate_to_methods(statement_scores, dataset: Dataset, scope=None) -> np.ndarray:
    """Max statement score per method, indexed like ``dataset.methods``.

    Only elements in ``scope`` (all elements when None) contribute; methods
    without any in-scope element score 0.
    """
    scores = np.asarray(statement_scores, dtype=float)
    if scores.shape != (dataset.num_elements,):
        raise ValueError("need one score per element")
    idx = dataset.method_index
    if scope is not None:
        scope = np.asarray(scope, dtype=np.int64)
        scores, idx = scores[scope], idx[scope]
    out = np.zeros(len(dataset.methods))
    np.maximum.at(out, idx, scores)
    return out


@dataclass(frozen=True)
class Ranking:
    order: tuple[int, ...]  # method indices sorted by (rank, index)
    scores: np.ndarray
    ranks: np.ndarray  # per method index

    def rank_of(self, method: int) -> int:
        return int(self.ranks[method])


def max_tiebreak_ranks(scores) -> np.ndarray:
    """rank(i) = number of entries scoring >= scores[i]."""
    s = np.asarray(scores, dtype=float)
    ordered = np.sort(s)
    return (len(s) - np.searchsorted(ordered, s, side="left")).astype(np.int64)


def rank_max_tiebreak(method_scores) -> Ranking:
    scores = np.asarray(method_scores, dtype=float)
    ranks = max_tiebreak_ranks(scores)
    order = tuple(int(i) for i in np.lexsort((np.arange(len(ranks)), ranks)))
    return Ranking(order=order, scores=scores, ranks=ranks)


def buggy_methods(dataset: Dataset, faults: Iterable[int] | None = None) -> set[int]:
    faults = dataset.faults if faults is None else faults
    return {int(dataset.method_index[f]) for f in faults}


def best_buggy_rank(ranking: Ranking, buggy: Iterable[int]) -> int:
    """Best (smallest) rank among the given buggy method indices."""
    buggy = list(buggy)
    if not buggy:
        raise ValueError("no buggy methods")
    for m in buggy:
        if not 0 <= m < len(ranking.ranks):
            raise ValueError(f"buggy method {m} is not ranked")
    return int(min(ranking.ranks[m] for m in buggy))


def localize(dataset: Dataset, tests: Iterable[int], scope=None) -> Ranking:
    """Ochiai-agg ranking of methods for the given suite."""
    scores = ochiai_statement_scores(dataset, tests)
    return rank_max_tiebreak(aggregate_to_methods(scores, dataset, scope))


def reward(init_rank: int, cur_rank: int) -> float:
    if init_rank < 1 or cur_rank < 1:
        raise ValueError("ranks start at 1")
    return (init_rank - cur_rank) / init_rank


def acc_at_n(best_ranks: Sequence[int], n: int) -> int:
    if n < 1:
        raise ValueError("n must be >= 1")
    return sum(1 for r in best_ranks if r <= n)


def average_precision(buggy_ranks: Sequence[int]) -> float:
    """AP over the ranks of one program's buggy methods."""
    ranks = np.asarray(list(buggy_ranks), dtype=np.int64)
    if len(ranks) == 0:
        raise ValueError("fault without ranked buggy methods")
    higher = np.array([np.count_nonzero(ranks <= r) for r in ranks])
    return float(np.mean(higher / ranks))


def mean_average_precision(rankings: Sequence[Ranking] | Sequence[Mapping[int, int]],
                           fault_sets: Sequence[Iterable[int]]) -> float:
    """mAP over programs; ``fault_sets[i]`` are the buggy method indices of program i."""
    if len(rankings) != len(fault_sets):
        raise ValueError("one fault set per ranking")
    if not rankings:
        return 0.0
    aps = []
    for ranking, buggy in zip(rankings, fault_sets):
        buggy = list(buggy)
        if not buggy:
            raise ValueError("fault without any buggy method")
        ranks = ranking.ranks if isinstance(ranking, Ranking) else ranking
        aps.append(average_precision([ranks[b] for b in buggy]))
    return float(np.mean(aps))
