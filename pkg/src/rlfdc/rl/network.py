"""The Q network: a state embedding followed by a three-layer FDC head.

Plain numpy with hand-written backprop. Parameters live in a dict of named
arrays so that the online and target copies are trivially cloned and compared.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

MODEL_VERSION = 1
STATE_DIM = 2
ACTION_DIM = 2
EMBED_DIMS = (16, 16)
HEAD_DIMS = (16, 32, 1)


class ModelError(ValueError):
    """Raised for inconsistent or unreadable model documents."""


def layer_shapes(no_embed: bool = False) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    fan_in = STATE_DIM
    if not no_embed:
        for i, width in enumerate(EMBED_DIMS, 1):
            shapes[f"embed{i}.weight"] = (width, fan_in)
            shapes[f"embed{i}.bias"] = (width,)
            fan_in = width
    fan_in += ACTION_DIM
    for i, width in enumerate(HEAD_DIMS, 1):
        shapes[f"head{i}.weight"] = (width, fan_in)
        shapes[f"head{i}.bias"] = (width,)
        fan_in = width
    return shapes


def init_params(rng: np.random.Generator, no_embed: bool = False) -> dict[str, np.ndarray]:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias."""
    params = {}
    shapes = layer_shapes(no_embed)
    for name, shape in shapes.items():
        layer = name.split(".")[0]
        fan_in = shapes[f"{layer}.weight"][1]
        bound = math.sqrt(1.0 / fan_in)
        params[name] = rng.uniform(-bound, bound, size=shape)
    return params


@dataclass
class QModel:
    params: dict[str, np.ndarray]
    no_embed: bool = False
    regular_q: bool = False
    # num_ag is divided by the scope size and split by the partition maximum
    # at feature time; only the num_tests divisor is a model constant.
    num_tests_divisor: float = 11.0
    config: dict = field(default_factory=dict)
    seed: int = 0

    def copy(self) -> "QModel":
        return QModel({k: v.copy() for k, v in self.params.items()}, self.no_embed,
                      self.regular_q, self.num_tests_divisor, dict(self.config), self.seed)

    def check(self) -> None:
        expected = layer_shapes(self.no_embed)
        if set(expected) != set(self.params):
            raise ModelError("parameter names do not match the variant")
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise ModelError(f"{name}: shape {self.params[name].shape} != {shape}")
            if not np.all(np.isfinite(self.params[name])):
                raise ModelError(f"{name}: non-finite weights")
        if not self.num_tests_divisor > 0:
            raise ModelError("normalizers must be strictly positive")

    @property
    def head_input_dim(self) -> int:
        return self.params["head1.weight"].shape[1]


def relu(x):
    return np.maximum(x, 0.0)


def _affine(h, weight, bias):
    # einsum keeps each row's reduction independent of the batch size, unlike
    # BLAS, so a candidate's score does not depend on who else is scored with it
    return np.einsum("bi,oi->bo", h, weight) + bias


def forward_batch(params: dict[str, np.ndarray], states, actions, no_embed: bool = False,
                  cache: list | None = None) -> np.ndarray:
    """Q values for a batch of (state, action) rows; shape (B,)."""
    s = np.atleast_2d(np.asarray(states, dtype=float))
    a = np.atleast_2d(np.asarray(actions, dtype=float))
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(a))):
        raise ValueError("non-finite network input")
    h = s
    if not no_embed:
        for i in (1, 2):
            z = _affine(h, params[f"embed{i}.weight"], params[f"embed{i}.bias"])
            if cache is not None:
                cache.append((f"embed{i}", h, z))
            h = relu(z)
    h = np.concatenate([h, a], axis=1)
    for i in (1, 2, 3):
        z = _affine(h, params[f"head{i}.weight"], params[f"head{i}.bias"])
        if cache is not None:
            cache.append((f"head{i}", h, z))
        h = relu(z) if i < 3 else z
    return h[:, 0]


def forward(model: QModel, state, action) -> float:
    return float(forward_batch(model.params, [state], [action], model.no_embed)[0])


def loss_and_grad(params: dict[str, np.ndarray], states, actions, targets,
                  no_embed: bool = False) -> tuple[float, dict[str, np.ndarray]]:
    """Mean squared error against fixed targets and its gradient."""
    cache: list = []
    q = forward_batch(params, states, actions, no_embed, cache)
    y = np.asarray(targets, dtype=float)
    diff = q - y
    loss = float(np.mean(diff ** 2))
    grads: dict[str, np.ndarray] = {}
    dz = (2.0 / len(y)) * diff[:, None]
    for idx in range(len(cache) - 1, -1, -1):
        name, x_in, z = cache[idx]
        if idx < len(cache) - 1:
            dz = dz * (z > 0)
        grads[f"{name}.weight"] = dz.T @ x_in
        grads[f"{name}.bias"] = dz.sum(axis=0)
        dx = dz @ params[f"{name}.weight"]
        if name == "head1" and not no_embed:
            dx = dx[:, :EMBED_DIMS[-1]]  # drop the action columns
        dz = dx
    return loss, grads


class SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params, grads):
        for k, g in grads.items():
            params[k] -= self.lr * g

    def state_dict(self) -> dict:
        return {}


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params, grads):
        self.t += 1
        for k, g in grads.items():
            m = self.m.setdefault(k, np.zeros_like(g))
            v = self.v.setdefault(k, np.zeros_like(g))
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            mhat = m / (1 - self.beta1 ** self.t)
            vhat = v / (1 - self.beta2 ** self.t)
            params[k] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def make_optimizer(name: str, lr: float):
    if name == "sgd":
        return SGD(lr)
    if name == "adam":
        return Adam(lr)
    raise ValueError(f"unknown optimizer {name!r}")


# ---------------------------------------------------------------------------
# persistence


def model_to_dict(model: QModel) -> dict:
    shapes = layer_shapes(model.no_embed)
    return {
        "version": MODEL_VERSION,
        "architecture": {
            "state_dim": STATE_DIM,
            "action_dim": ACTION_DIM,
            "embed": [] if model.no_embed else list(EMBED_DIMS),
            "head": list(HEAD_DIMS),
            "head_input": model.head_input_dim,
        },
        "variant": {"no_embed": model.no_embed, "regular_q": model.regular_q},
        "normalizers": {"num_tests": model.num_tests_divisor, "num_ag": "scope_size",
                        "split": "partition_max"},
        "params": {name: {"shape": list(shape),
                          "data": [float(x) for x in model.params[name].ravel()]}
                   for name, shape in shapes.items()},
        "config": model.config,
        "seed": model.seed,
    }


def dumps_model(model: QModel) -> str:
    return json.dumps(model_to_dict(model), indent=1) + "\n"


def model_from_dict(doc: dict) -> QModel:
    if doc.get("version") != MODEL_VERSION:
        raise ModelError(f"unsupported model version {doc.get('version')!r}")
    try:
        variant = doc["variant"]
        no_embed = bool(variant["no_embed"])
        params = {}
        for name, entry in doc["params"].items():
            shape = tuple(int(d) for d in entry["shape"])
            data = np.array(entry["data"], dtype=float)
            if data.size != math.prod(shape):
                raise ModelError(f"{name}: {data.size} values for shape {shape}")
            params[name] = data.reshape(shape)
        model = QModel(params, no_embed, bool(variant["regular_q"]),
                       float(doc["normalizers"]["num_tests"]), dict(doc.get("config", {})),
                       int(doc.get("seed", 0)))
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed model document: {exc!r}") from exc
    if doc.get("architecture", {}).get("head_input") not in (None, model.head_input_dim):
        raise ModelError("architecture header disagrees with parameter shapes")
    model.check()
    return model


def save_model(model: QModel, path) -> None:
    from ..io import atomic_write_text
    atomic_write_text(path, dumps_model(model))


def load_model(path) -> QModel:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"malformed model document: {exc}") from exc
    return model_from_dict(doc)
