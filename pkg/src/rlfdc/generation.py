"""FDC-guided evolutionary test generation, simulated over coverage vectors.

Individuals are coverage bit-vectors rather than executable tests; the FDC
metric only ever sees coverage, so this exercises the fitness-function role
without a real input generator.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .coverage import Dataset, SuiteContext, test_record
from .metrics import ScorerSpec, make_scorer


@dataclass
class GenConfig:
    fitness: ScorerSpec
    population: int = 20
    generations: int = 60
    mutation_rate: float | None = None  # per bit; None means 1/n
    crossover_prob: float = 0.5
    elitism: int = 1
    seed: int = 0
    output_count: int = 10

    def validate(self) -> None:
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if not 0 <= self.elitism < self.population:
            raise ValueError("elitism must be in [0, population)")
        if not 0.0 <= self.crossover_prob <= 1.0:
            raise ValueError("crossover_prob must lie in [0, 1]")
        if self.mutation_rate is not None and not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must lie in [0, 1]")
        if self.output_count < 1:
            raise ValueError("output_count must be >= 1")
        self.fitness.validate()


@dataclass
class GAResult:
    vectors: list[np.ndarray]  # top distinct individuals, best first
    fitness: list[float]
    best_per_generation: list[float] = field(default_factory=list)
    initial_population: np.ndarray | None = None
    final_population: np.ndarray | None = None


def _mutate(rng, pop: np.ndarray, rate: float) -> np.ndarray:
    if rate <= 0:
        return pop
    return pop ^ (rng.random(pop.shape) < rate)


def initial_population(rng, failing_row: np.ndarray, size: int, rate: float) -> np.ndarray:
    """Half mutated copies of the failing test's coverage, half uniform random."""
    n = len(failing_row)
    seeded = size // 2
    copies = _mutate(rng, np.repeat(failing_row[None, :], seeded, axis=0), rate)
    random_part = rng.random((size - seeded, n)) < 0.5
    return np.vstack([copies, random_part])


def ga_generate(dataset: Dataset, failing_test: int, config: GenConfig,
                population: np.ndarray | None = None) -> GAResult:
    config.validate()
    n = dataset.num_elements
    rate = 1.0 / n if config.mutation_rate is None else config.mutation_rate
    rng = np.random.default_rng([config.seed, 7])
    scorer = make_scorer(config.fitness)
    ctx = SuiteContext(dataset, failing_test)

    if population is None:
        pop = initial_population(rng, dataset.coverage[failing_test], config.population, rate)
    else:
        pop = np.array(population, dtype=bool)
        if pop.ndim != 2 or pop.shape[1] != n or len(pop) < 2:
            raise ValueError("population must be a (size >= 2, n) boolean array")
    start = pop.copy()
    size = len(pop)
    half = max(2, size // 2)
    best = []

    for _ in range(config.generations):
        fit = scorer.score_rows(ctx, pop)
        best.append(float(fit.max()))
        order = np.argsort(-fit, kind="stable")
        elite = pop[order[:config.elitism]]
        parents = pop[order[:half]]
        children = np.empty((size - config.elitism, n), dtype=bool)
        for c in range(len(children)):
            a, b = parents[rng.integers(len(parents), size=2)]
            if rng.random() < config.crossover_prob:
                child = np.where(rng.random(n) < 0.5, a, b)
            else:
                child = a.copy()
            children[c] = _mutate(rng, child, rate)
        pop = np.vstack([elite, children])

    fit = scorer.score_rows(ctx, pop)
    best.append(float(fit.max()))
    order = np.argsort(-fit, kind="stable")
    vectors, scores, seen = [], [], set()
    for i in order:
        key = pop[i].tobytes()
        if key in seen:
            continue
        seen.add(key)
        vectors.append(pop[i].copy())
        scores.append(float(fit[i]))
        if len(vectors) == config.output_count:
            break
    return GAResult(vectors, scores, best, start, pop)


def _coin(vector: np.ndarray, seed: int) -> float:
    digest = hashlib.sha256(np.packbits(vector).tobytes() + len(vector).to_bytes(4, "little"))
    key = int.from_bytes(digest.digest()[:8], "little")
    return float(np.random.default_rng([seed, key]).random())


def label_generated(dataset: Dataset, vectors, trigger_probability: float,
                    seed: int) -> list[dict]:
    """Simulated oracle: fail iff a planted fault is covered and the trigger fires.

    Returns dataset-format test records numbered after the dataset's own tests.
    """
    if not dataset.faults:
        raise ValueError("labeling needs ground-truth faults")
    if not 0.0 <= trigger_probability <= 1.0:
        raise ValueError("trigger_probability must lie in [0, 1]")
    faults = np.array(sorted(dataset.faults))
    records = []
    for i, v in enumerate(vectors):
        v = np.asarray(v, dtype=bool)
        if v.shape != (dataset.num_elements,):
            raise ValueError("generated vector length differs from the element count")
        fails = bool(v[faults].any()) and _coin(v, seed) < trigger_probability
        tid = dataset.num_tests + i
        records.append(test_record(tid, f"gen{i}", v, "fail" if fails else "pass"))
    return records
