"""Seeded synthetic fault-localization benchmarks.

Each program is a set of methods made of statements. A test picks methods at
random and, inside a picked method, always runs the entry statement and each
other statement with a fixed probability. Planted faults make a covering test
fail only when a seeded trigger coin fires, which models coincidental
correctness.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .coverage import Dataset, Element, Test, dumps_dataset
from .io import atomic_write_text


class RetryBudgetExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    methods: int = 20
    stmts_min: int = 3
    stmts_max: int = 8
    tests: int = 60
    method_prob: float = 0.3
    stmt_prob: float = 0.5
    faults: int = 1
    trigger_prob: float = 0.8
    seed: int = 0
    max_retries: int = 100

    def validate(self) -> None:
        for name in ("method_prob", "stmt_prob", "trigger_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("methods", "stmts_min", "tests", "faults", "max_retries"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.stmts_max < self.stmts_min:
            raise ValueError("stmts_max < stmts_min")
        if self.faults > self.methods * self.stmts_min:
            raise ValueError("more faults than the smallest possible program has statements")


def _layout(rng: np.random.Generator, spec: SyntheticSpec) -> tuple[list[int], np.ndarray]:
    sizes = rng.integers(spec.stmts_min, spec.stmts_max + 1, size=spec.methods)
    method_of = np.repeat(np.arange(spec.methods), sizes)
    return sizes.tolist(), method_of


def expected_density(spec: SyntheticSpec, sizes) -> float:
    n = sum(sizes)
    per_method = [1.0 + spec.stmt_prob * (s - 1) for s in sizes]
    return spec.method_prob * sum(per_method) / n


def _attempt(spec: SyntheticSpec, index: int, attempt: int) -> Dataset | None:
    rng = np.random.default_rng([spec.seed, index, attempt])
    sizes, method_of = _layout(rng, spec)
    n = len(method_of)
    entries = np.zeros(n, dtype=bool)
    entries[np.concatenate([[0], np.cumsum(sizes)[:-1]])] = True

    picked = rng.random((spec.tests, spec.methods)) < spec.method_prob
    stmt_coin = rng.random((spec.tests, n)) < spec.stmt_prob
    coverage = picked[:, method_of] & (entries | stmt_coin)

    faults = np.sort(rng.choice(n, size=spec.faults, replace=False))
    triggered = rng.random(spec.tests) < spec.trigger_prob
    fails = coverage[:, faults].any(axis=1) & triggered
    if not fails.any():
        return None

    elements = []
    for m, size in enumerate(sizes):
        for j in range(size):
            elements.append(Element(len(elements), f"m{m}", f"m{m}.s{j}"))
    tests = tuple(Test(i, f"t{i}", "fail" if fails[i] else "pass") for i in range(spec.tests))
    first_fail = int(np.flatnonzero(fails)[0])
    return Dataset(tuple(elements), tests, coverage, frozenset(int(f) for f in faults), (first_fail,))


def generate_program(spec: SyntheticSpec, index: int) -> tuple[Dataset, int]:
    """The ``index``-th program and the attempt number that produced it."""
    spec.validate()
    for attempt in range(spec.max_retries):
        ds = _attempt(spec, index, attempt)
        if ds is not None:
            return ds, attempt
    raise RetryBudgetExhausted(
        f"program {index}: no failing test after {spec.max_retries} attempts")


def generate_benchmark(spec: SyntheticSpec, count: int) -> list[Dataset]:
    return [generate_program(spec, i)[0] for i in range(count)]


def write_benchmark(spec: SyntheticSpec, count: int, out_dir) -> list[Path]:
    """One dataset document per program plus ``manifest.json``; returns written paths."""
    out = Path(out_dir)
    written, entries = [], []
    for i in range(count):
        ds, attempt = generate_program(spec, i)
        path = out / f"fault_{i:03d}.json"
        atomic_write_text(path, dumps_dataset(ds))
        written.append(path)
        entries.append({"file": path.name, "index": i, "seed": spec.seed, "attempt": attempt})
    manifest = out / "manifest.json"
    atomic_write_text(manifest, json.dumps({"spec": asdict(spec), "programs": entries}, indent=1) + "\n")
    written.append(manifest)
    return written
