import numpy as np

from rlfdc.coverage import make_dataset, read_dataset
from pathlib import Path

DATA = Path(__file__).parent / "data"


def motivating_example():
    """Table of 28 statements in six methods; t0 fails, t1..t20 pass, m4 is buggy."""
    return read_dataset(DATA / "motivating_example.json")


def random_dataset(rng, max_tests=8, max_elements=12, min_tests=1, choices=("pass",)):
    """Random matrix whose first test fails; the rest draw outcomes from ``choices``."""
    m = int(rng.integers(min_tests, max_tests + 1))
    n = int(rng.integers(1, max_elements + 1))
    rows = rng.random((m, n)) < rng.uniform(0.2, 0.8)
    methods = [f"m{int(x)}" for x in np.sort(rng.integers(0, max(1, n // 2), size=n))]
    outcomes = ["fail"] + [str(rng.choice(choices)) for _ in range(m - 1)]
    return make_dataset(methods, rows, outcomes)


def toy_env(seed, n_methods=6, per=3, n_distract=14, outside=6):
    """A pool in which exactly one candidate moves the buggy method to rank 1.

    The golden candidate passes and covers every statement of every non-buggy
    method; the distractors only touch elements the failing test never runs,
    so their reward is exactly 0. Returns the dataset and the golden test id.
    """
    rng = np.random.default_rng(seed)
    methods = [f"m{i}" for i in range(n_methods) for _ in range(per)] + ["extra"] * outside
    n = len(methods)
    scope = n_methods * per
    buggy = int(rng.integers(n_methods))
    fault = buggy * per + int(rng.integers(per))
    failing = np.zeros(n, bool)
    failing[:scope] = True
    golden = np.zeros(n, bool)
    for m in range(n_methods):
        if m != buggy:
            golden[m * per:(m + 1) * per] = True
    tests = []
    for _ in range(n_distract):
        d = np.zeros(n, bool)
        d[scope:] = rng.random(outside) < 0.5
        tests.append(d)
    pos = int(rng.integers(n_distract + 1))
    tests.insert(pos, golden)
    ds = make_dataset(methods, np.array([failing] + tests),
                      ["fail"] + ["pass"] * len(tests), faults=[fault])
    return ds, pos + 1


def numeric_grad(params, states, actions, targets, no_embed, eps=1e-5):
    """Central finite differences of the batch MSE, one coordinate at a time."""
    from rlfdc.rl import forward_batch
    y = np.asarray(targets, dtype=float)

    def loss():
        return float(np.mean((forward_batch(params, states, actions, no_embed) - y) ** 2))

    out = {}
    for name, value in params.items():
        g = np.zeros_like(value)
        for idx in np.ndindex(value.shape):
            orig = value[idx]
            value[idx] = orig + eps
            plus = loss()
            value[idx] = orig - eps
            minus = loss()
            value[idx] = orig
            g[idx] = (plus - minus) / (2 * eps)
        out[name] = g
    return out


def relative_error(analytic, numeric, floor=1e-8):
    """Largest |a - n| / max(|a|, |n|, floor) over every coordinate."""
    worst = 0.0
    for name in analytic:
        a, n = analytic[name], numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def min_preactivation(params, states, actions, no_embed):
    from rlfdc.rl import forward_batch
    cache = []
    forward_batch(params, states, actions, no_embed, cache)
    return min(float(np.min(np.abs(z))) for name, _, z in cache if name != "head3")


def gradient_config(rng, no_embed, margin=1e-3):
    """Random small model and batch whose ReLU inputs all sit at least ``margin`` from the kink.

    Finite differences are meaningless across a kink, so configurations
    that straddle one are redrawn.
    """
    from rlfdc.rl.network import init_params
    while True:
        params = init_params(rng, no_embed)
        scale = rng.uniform(0.5, 2.0)
        params = {k: v * scale for k, v in params.items()}
        b = int(rng.integers(1, 7))
        states = rng.random((b, 2))
        actions = rng.random((b, 2))
        targets = rng.normal(size=b)
        if min_preactivation(params, states, actions, no_embed) > margin:
            return params, states, actions, targets
