"""Coverage matrices, ambiguity groups and the state/action features.

A :class:`Dataset` is an immutable tests x elements coverage matrix plus the
element -> method map, test outcomes and (optionally) the planted faults.
A :class:`SuiteContext` is the growing suite rooted at one failing test; every
feature the learned metric consumes is computed from it.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

FORMAT_VERSION = 1
OUTCOMES = ("pass", "fail", "unknown")
SCOPE_POLICIES = ("failing-covered", "all-elements")


class DatasetError(ValueError):
    """Raised for malformed or inconsistent dataset documents."""


@dataclass(frozen=True)
class Element:
    id: int
    method: str
    name: str


@dataclass(frozen=True)
class Test:
    __test__ = False  # keep pytest from collecting it

    id: int
    name: str
    outcome: str


@dataclass(frozen=True, eq=False)
class Dataset:
    elements: tuple[Element, ...]
    tests: tuple[Test, ...]
    coverage: np.ndarray  # bool, shape (num_tests, num_elements); read-only
    faults: frozenset[int] = frozenset()
    initial_failing: tuple[int, ...] = ()
    methods: tuple[str, ...] = field(init=False)
    method_index: np.ndarray = field(init=False)  # element -> position in ``methods``

    def __post_init__(self):
        cov = np.array(self.coverage, dtype=bool)
        if cov.ndim != 2 or cov.shape != (len(self.tests), len(self.elements)):
            raise DatasetError(
                f"coverage shape {cov.shape} does not match "
                f"{len(self.tests)} tests x {len(self.elements)} elements")
        cov.setflags(write=False)
        object.__setattr__(self, "coverage", cov)

        for i, e in enumerate(self.elements):
            if e.id != i:
                raise DatasetError(f"element ids must be contiguous from 0, got {e.id} at {i}")
        for i, t in enumerate(self.tests):
            if t.id != i:
                raise DatasetError(f"test ids must be contiguous from 0, got {t.id} at {i}")
            if t.outcome not in OUTCOMES:
                raise DatasetError(f"test {t.id}: bad outcome {t.outcome!r}")
        for f in self.faults:
            if not 0 <= f < len(self.elements):
                raise DatasetError(f"fault id {f} out of range")
        for t in self.initial_failing:
            if not 0 <= t < len(self.tests):
                raise DatasetError(f"initial failing test {t} out of range")
            if self.tests[t].outcome != "fail":
                raise DatasetError(f"initial failing test {t} has outcome {self.tests[t].outcome!r}")

        methods: dict[str, int] = {}
        for e in self.elements:
            methods.setdefault(e.method, len(methods))
        idx = np.array([methods[e.method] for e in self.elements], dtype=np.int64)
        idx.setflags(write=False)
        object.__setattr__(self, "methods", tuple(methods))
        object.__setattr__(self, "method_index", idx)

    @property
    def num_tests(self) -> int:
        return len(self.tests)

    @property
    def num_elements(self) -> int:
        return len(self.elements)

    def outcome(self, test_id: int) -> str:
        return self.tests[test_id].outcome

    def failing_tests(self) -> list[int]:
        return [t.id for t in self.tests if t.outcome == "fail"]

    def fault_methods(self) -> set[int]:
        """Indices (into ``methods``) of methods holding at least one fault."""
        return {int(self.method_index[f]) for f in self.faults}


def _parse_coverage(s: str, n: int, test_id) -> list[bool]:
    if not isinstance(s, str) or len(s) != n:
        got = len(s) if isinstance(s, str) else type(s).__name__
        raise DatasetError(f"test {test_id}: coverage length {got} != element count {n}")
    if set(s) - {"0", "1"}:
        raise DatasetError(f"test {test_id}: coverage must contain only '0'/'1'")
    return [c == "1" for c in s]


def dataset_from_dict(doc: dict) -> Dataset:
    try:
        if doc.get("version") != FORMAT_VERSION:
            raise DatasetError(f"unsupported dataset version {doc.get('version')!r}")
        elements = tuple(Element(int(e["id"]), str(e["method"]), str(e["name"]))
                         for e in doc["elements"])
        n = len(elements)
        tests, rows = [], []
        for t in doc["tests"]:
            rows.append(_parse_coverage(t["coverage"], n, t.get("id")))
            tests.append(Test(int(t["id"]), str(t["name"]), t["outcome"]))
        faults = frozenset(int(f) for f in doc.get("faults", []))
        initial = tuple(int(t) for t in doc.get("initial_failing", []))
    except (KeyError, TypeError, AttributeError) as exc:
        raise DatasetError(f"malformed dataset document: {exc!r}") from exc
    cov = np.array(rows, dtype=bool).reshape(len(tests), n)
    return Dataset(elements, tuple(tests), cov, faults, initial)


def load_dataset(data: bytes | str) -> Dataset:
    """Parse and validate a serialized dataset document."""
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"malformed dataset document: {exc}") from exc
    if not isinstance(doc, dict):
        raise DatasetError("dataset document must be an object")
    return dataset_from_dict(doc)


def read_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        return load_dataset(fh.read())


def coverage_string(row: np.ndarray) -> str:
    return "".join("1" if b else "0" for b in row)


def test_record(test_id: int, name: str, row: np.ndarray, outcome: str) -> dict:
    return {"id": int(test_id), "name": name, "coverage": coverage_string(row), "outcome": outcome}


def dataset_to_dict(ds: Dataset) -> dict:
    return {
        "version": FORMAT_VERSION,
        "elements": [{"id": e.id, "method": e.method, "name": e.name} for e in ds.elements],
        "tests": [test_record(t.id, t.name, ds.coverage[t.id], t.outcome) for t in ds.tests],
        "faults": sorted(ds.faults),
        "initial_failing": list(ds.initial_failing),
    }


def dumps_dataset(ds: Dataset) -> str:
    """Canonical text form: fixed key order, one object per line, trailing newline."""
    doc = dataset_to_dict(ds)
    lines = ["{", f'"version": {doc["version"]},', '"elements": [']
    lines.append(",\n".join(json.dumps(e) for e in doc["elements"]))
    lines.append("],")
    lines.append('"tests": [')
    lines.append(",\n".join(json.dumps(t) for t in doc["tests"]))
    lines.append("],")
    lines.append(f'"faults": {json.dumps(doc["faults"])},')
    lines.append(f'"initial_failing": {json.dumps(doc["initial_failing"])}')
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# suites and ambiguity groups


@dataclass(frozen=True)
class AmbiguityPartition:
    groups: tuple[frozenset[int], ...]
    scope: frozenset[int]
    defining_tests: tuple[int, ...]


class SuiteContext:
    """The suite ``{failing_test} + selected`` for one fault.

    Single-owner and mutable; use :meth:`clone` to branch.
    """

    def __init__(self, dataset: Dataset, failing_test: int, selected: Iterable[int] = (),
                 scope_policy: str = "failing-covered"):
        if scope_policy not in SCOPE_POLICIES:
            raise ValueError(f"unknown scope policy {scope_policy!r}")
        if not 0 <= failing_test < dataset.num_tests:
            raise ValueError(f"failing test {failing_test} out of range")
        self.dataset = dataset
        self.failing_test = failing_test
        self.scope_policy = scope_policy
        self.selected: list[int] = []
        self._groups: tuple[np.ndarray, np.ndarray] | None = None
        if scope_policy == "failing-covered":
            self.scope = np.flatnonzero(dataset.coverage[failing_test])
        else:
            self.scope = np.arange(dataset.num_elements)
        for t in selected:
            self.add(t)

    @property
    def tests(self) -> list[int]:
        return [self.failing_test, *self.selected]

    def __contains__(self, test_id) -> bool:
        return test_id == self.failing_test or test_id in self.selected

    def add(self, test_id: int) -> None:
        if test_id in self:
            raise ValueError(f"test {test_id} already in suite")
        if not 0 <= test_id < self.dataset.num_tests:
            raise ValueError(f"test {test_id} out of range")
        self.selected.append(int(test_id))
        self._groups = None

    def clone(self) -> "SuiteContext":
        other = copy.copy(self)
        other.selected = list(self.selected)
        return other

    def matrix(self) -> np.ndarray:
        """Coverage of the suite restricted to the scope (rows follow :attr:`tests`)."""
        return self.dataset.coverage[np.ix_(self.tests, self.scope)]

    def group_labels(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-scope-element group label and the size of each group.

        Labels are numbered in order of each group's smallest element id.
        """
        if self._groups is None:
            self._groups = group_labels(self.matrix())
        return self._groups

    def coverage_of(self, candidate: int) -> np.ndarray:
        if candidate in self:
            raise ValueError(f"candidate {candidate} already in suite")
        return self.dataset.coverage[candidate]


def candidate_pool(dataset: Dataset, failing_test: int) -> list[int]:
    """Every test except the failing ones; the root failing test sits in the suite."""
    return [t.id for t in dataset.tests if t.id != failing_test and t.outcome != "fail"]


def group_labels(sub: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Group the columns of ``sub`` by identical content.

    Returns ``(labels, sizes)`` where labels are assigned in order of first
    column occurrence.
    """
    n = sub.shape[1]
    if n == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    packed = np.packbits(sub, axis=0).T  # one row of bytes per column
    width = -(-packed.shape[1] // 8) * 8
    if width != packed.shape[1]:
        packed = np.hstack([packed, np.zeros((n, width - packed.shape[1]), dtype=np.uint8)])
    keys = np.ascontiguousarray(packed).view(np.uint64)
    if keys.shape[1] == 1:
        _, first, inverse = np.unique(keys[:, 0], return_index=True, return_inverse=True)
    else:
        _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    # np.unique sorts by key; renumber by first occurrence
    order = np.argsort(first, kind="stable")
    relabel = np.empty_like(order)
    relabel[order] = np.arange(len(order))
    labels = relabel[inverse]
    return labels, np.bincount(labels, minlength=len(order))


def ambiguity_partition(ctx: SuiteContext) -> AmbiguityPartition:
    labels, sizes = ctx.group_labels()
    members: list[list[int]] = [[] for _ in sizes]
    for elem, lab in zip(ctx.scope.tolist(), labels.tolist()):
        members[lab].append(elem)
    return AmbiguityPartition(
        groups=tuple(frozenset(g) for g in members),
        scope=frozenset(ctx.scope.tolist()),
        defining_tests=tuple(ctx.tests),
    )


# ---------------------------------------------------------------------------
# state and action features


@dataclass(frozen=True)
class StateVector:
    num_tests: int
    num_ag: int


@dataclass(frozen=True)
class ActionVector:
    cover: float
    split: float
    split_norm: float


def state_features(ctx: SuiteContext) -> StateVector:
    _, sizes = ctx.group_labels()
    return StateVector(num_tests=1 + len(ctx.selected), num_ag=len(sizes))


def jaccard_similarity(a, b) -> float:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return np.count_nonzero(a & b) / union


def split_capacity(sizes: np.ndarray) -> int:
    """Largest attainable raw split for a partition with these group sizes."""
    sizes = np.asarray(sizes, dtype=np.int64)
    return int(np.sum(sizes * (sizes // 2)))


def batch_cover(failing_row: np.ndarray, rows: np.ndarray) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(rows, dtype=bool))
    inter = np.count_nonzero(rows & failing_row, axis=1)
    union = np.count_nonzero(rows | failing_row, axis=1)
    return np.divide(inter, union, out=np.zeros(len(rows)), where=union > 0)


def batch_split(labels: np.ndarray, sizes: np.ndarray, rows_in_scope: np.ndarray) -> np.ndarray:
    """Raw split for each row (already restricted to the scope)."""
    rows_in_scope = np.atleast_2d(np.asarray(rows_in_scope, dtype=bool))
    if len(sizes) == 0:
        return np.zeros(len(rows_in_scope))
    onehot = np.zeros((len(labels), len(sizes)))
    onehot[np.arange(len(labels)), labels] = 1.0
    covered = rows_in_scope.astype(float) @ onehot
    div = np.minimum(covered, sizes - covered)
    return div @ sizes.astype(float)


def action_matrix(ctx: SuiteContext, rows: np.ndarray) -> np.ndarray:
    """``(cover, split_raw, split_norm)`` for each coverage row, shape (k, 3).

    Rows are full-length coverage vectors; they need not belong to the dataset.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=bool))
    labels, sizes = ctx.group_labels()
    cover = batch_cover(ctx.dataset.coverage[ctx.failing_test], rows)
    raw = batch_split(labels, sizes, rows[:, ctx.scope])
    cap = split_capacity(sizes)
    norm = raw / cap if cap > 0 else np.zeros_like(raw)
    return np.column_stack([cover, raw, norm])


def cover_feature(ctx: SuiteContext, candidate: int) -> float:
    return jaccard_similarity(ctx.coverage_of(candidate), ctx.dataset.coverage[ctx.failing_test])


def split_feature(ctx: SuiteContext, candidate: int) -> tuple[float, float]:
    """Raw and normalized split of ``candidate`` over the suite's current groups."""
    row = ctx.coverage_of(candidate)
    _, raw, norm = action_matrix(ctx, row[None, :])[0]
    return float(raw), float(norm)


def action_features(ctx: SuiteContext, candidate: int) -> ActionVector:
    cover = cover_feature(ctx, candidate)
    raw, norm = split_feature(ctx, candidate)
    return ActionVector(cover, raw, norm)


def make_dataset(methods: Sequence[str], rows: Sequence[Sequence[int]] | np.ndarray,
                 outcomes: Sequence[str], faults: Iterable[int] = (),
                 initial_failing: Iterable[int] | None = None,
                 element_names: Sequence[str] | None = None,
                 test_names: Sequence[str] | None = None) -> Dataset:
    """Convenience constructor from a method-per-element list and a 0/1 matrix."""
    cov = np.asarray(rows, dtype=bool).reshape(len(outcomes), len(methods))
    elements = tuple(Element(i, m, element_names[i] if element_names else f"e{i}")
                     for i, m in enumerate(methods))
    tests = tuple(Test(i, test_names[i] if test_names else f"t{i}", o)
                  for i, o in enumerate(outcomes))
    if initial_failing is None:
        fails = [i for i, o in enumerate(outcomes) if o == "fail"]
        initial_failing = fails[:1]
    return Dataset(elements, tests, cov, frozenset(faults), tuple(initial_failing))
