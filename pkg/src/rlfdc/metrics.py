"""Baseline FDC metrics and the scorer interface shared by selection and generation.

Suite-level metrics (EntBug, DDU, TfD) take a coverage matrix. As scorers they
rate a candidate by the metric value of the suite after adding it.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .coverage import Dataset, SuiteContext, action_matrix, group_labels
from .sbfl import ochiai_statement_scores

KINDS = ("rlfdc", "tfd", "ddu", "entbug", "fdg", "cover", "split", "weighted", "random")
DEFAULT_ALPHA = 0.5


def _submatrix(dataset: Dataset, test_subset, scope=None) -> np.ndarray:
    tests = list(test_subset)
    if not tests:
        raise ValueError("empty test subset")
    cols = np.arange(dataset.num_elements) if scope is None else np.asarray(scope)
    return dataset.coverage[np.ix_(tests, cols)]


def density(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        raise ValueError("empty coverage matrix")
    return np.count_nonzero(matrix) / matrix.size


def entbug_matrix(matrix: np.ndarray) -> float:
    return 1.0 - abs(1.0 - 2.0 * density(matrix))


def diversity_matrix(matrix: np.ndarray) -> float:
    """Gini-Simpson index over identical test rows; 0 for fewer than two tests."""
    m = matrix.shape[0]
    if m < 2:
        return 0.0
    _, counts = np.unique(np.packbits(matrix, axis=1), axis=0, return_counts=True)
    return 1.0 - float(np.sum(counts * (counts - 1))) / (m * (m - 1))


def tfd_matrix(matrix: np.ndarray) -> int:
    return len(group_labels(matrix)[1])


def ddu_matrix(matrix: np.ndarray) -> float:
    rho = density(matrix)
    return rho * diversity_matrix(matrix) * (tfd_matrix(matrix) / matrix.shape[1])


def entbug(dataset: Dataset, test_subset, scope=None) -> float:
    return entbug_matrix(_submatrix(dataset, test_subset, scope))


def ddu(dataset: Dataset, test_subset, scope=None) -> float:
    return ddu_matrix(_submatrix(dataset, test_subset, scope))


def tfd(dataset: Dataset, test_subset, scope=None) -> int:
    return tfd_matrix(_submatrix(dataset, test_subset, scope))


# ---------------------------------------------------------------------------
# per-candidate forms, vectorized over candidate coverage rows


def _group_counts(ctx: SuiteContext, rows: np.ndarray):
    labels, sizes = ctx.group_labels()
    onehot = np.zeros((len(labels), len(sizes)))
    onehot[np.arange(len(labels)), labels] = 1.0
    scoped = rows[:, ctx.scope].astype(float)
    return labels, sizes, onehot, scoped, scoped @ onehot


def tfd_rows(ctx: SuiteContext, rows: np.ndarray) -> np.ndarray:
    _, sizes, _, _, covered = _group_counts(ctx, rows)
    return np.sum((covered > 0).astype(int) + (covered < sizes).astype(int), axis=1).astype(float)


def entbug_rows(ctx: SuiteContext, rows: np.ndarray) -> np.ndarray:
    mat = ctx.matrix()
    n = mat.shape[1]
    if n == 0:
        raise ValueError("empty coverage matrix")
    ones = np.count_nonzero(mat) + np.count_nonzero(rows[:, ctx.scope], axis=1)
    rho = ones / ((mat.shape[0] + 1) * n)
    return 1.0 - np.abs(1.0 - 2.0 * rho)


def ddu_rows(ctx: SuiteContext, rows: np.ndarray) -> np.ndarray:
    mat = ctx.matrix()
    m, n = mat.shape[0] + 1, mat.shape[1]
    if n == 0:
        raise ValueError("empty coverage matrix")
    scoped = rows[:, ctx.scope]
    rho = (np.count_nonzero(mat) + np.count_nonzero(scoped, axis=1)) / (m * n)
    row_counts: dict[bytes, int] = {}
    for r in mat:
        key = np.packbits(r).tobytes()
        row_counts[key] = row_counts.get(key, 0) + 1
    base = sum(c * (c - 1) for c in row_counts.values())
    same = np.array([row_counts.get(np.packbits(r).tobytes(), 0) for r in scoped])
    diversity = 1.0 - (base + 2 * same) / (m * (m - 1))
    uniqueness = tfd_rows(ctx, rows) / n
    return rho * diversity * uniqueness


def fdg_rows(ctx: SuiteContext, rows: np.ndarray, alpha: float) -> np.ndarray:
    """FDG of each candidate row against the suite's revealed outcomes.

    Ochiai weights come from the current suite; the candidate's own outcome is
    never consulted.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    _, sizes, onehot, scoped, covered = _group_counts(ctx, rows)
    n = len(ctx.scope)
    if n == 0:
        return np.zeros(len(rows))
    w = ochiai_statement_scores(ctx.dataset, ctx.tests)[ctx.scope]
    coverage_term = scoped @ w / n
    mass = w.sum()
    if mass == 0:
        return (1.0 - alpha) * coverage_term
    if n == 1:
        split_term = np.ones(len(rows))
    else:
        p = w / mass
        p_cov = (scoped * p) @ onehot
        p_all = p @ onehot
        amb = p_cov * (covered - 1) + (p_all - p_cov) * (sizes - covered - 1)
        # an empty half has zero mass, so its (|ag| - 1) = -1 factor drops out
        split_term = 1.0 - amb.sum(axis=1) / (n - 1)
    return alpha * split_term + (1.0 - alpha) * coverage_term


def fdg(ctx: SuiteContext, candidate: int, alpha: float = DEFAULT_ALPHA) -> float:
    return float(fdg_rows(ctx, ctx.coverage_of(candidate)[None, :], alpha)[0])


def weighted_cover_split(ctx: SuiteContext, candidate: int, alpha: float) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    cover, _, split_norm = action_matrix(ctx, ctx.coverage_of(candidate)[None, :])[0]
    return float(alpha * split_norm + (1.0 - alpha) * cover)


# ---------------------------------------------------------------------------
# scorers


@dataclass(frozen=True)
class ScorerSpec:
    kind: str
    alpha: float | None = None
    model: Any = None
    seed: int | None = None

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown metric kind {self.kind!r}")
        needs_alpha = self.kind in ("fdg", "weighted")
        if needs_alpha != (self.alpha is not None):
            raise ValueError(f"{self.kind}: alpha is {'required' if needs_alpha else 'not accepted'}")
        if needs_alpha and not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if (self.kind == "rlfdc") != (self.model is not None):
            raise ValueError(f"{self.kind}: a model is {'required' if self.kind == 'rlfdc' else 'not accepted'}")
        if self.kind == "random" and self.seed is None:
            raise ValueError("random: a seed is required")

    @property
    def result_aware(self) -> bool:
        return self.kind == "fdg"


class Scorer:
    """Rates candidates against a suite; higher is better."""

    def __init__(self, spec: ScorerSpec):
        spec.validate()
        self.spec = spec
        self._rng = np.random.default_rng(spec.seed) if spec.kind == "random" else None

    @property
    def kind(self) -> str:
        return self.spec.kind

    def score_rows(self, ctx: SuiteContext, rows) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=bool))
        kind = self.spec.kind
        if len(rows) == 0:
            return np.zeros(0)
        if kind == "random":
            return self._rng.random(len(rows))
        if kind == "tfd":
            return tfd_rows(ctx, rows)
        if kind == "entbug":
            return entbug_rows(ctx, rows)
        if kind == "ddu":
            return ddu_rows(ctx, rows)
        if kind == "fdg":
            return fdg_rows(ctx, rows, self.spec.alpha)
        if kind == "rlfdc":
            from .rl import predict_rows
            return predict_rows(self.spec.model, ctx, rows)
        feats = action_matrix(ctx, rows)
        if kind == "cover":
            return feats[:, 0]
        if kind == "split":
            return feats[:, 2]
        a = self.spec.alpha
        return a * feats[:, 2] + (1.0 - a) * feats[:, 0]

    def score_tests(self, ctx: SuiteContext, candidates) -> np.ndarray:
        candidates = list(candidates)
        for c in candidates:
            if c in ctx:
                raise ValueError(f"candidate {c} already in suite")
        return self.score_rows(ctx, ctx.dataset.coverage[candidates])

    def __call__(self, ctx: SuiteContext, candidate: int) -> float:
        return float(self.score_tests(ctx, [candidate])[0])


def make_scorer(spec: ScorerSpec) -> Scorer:
    return Scorer(spec)
