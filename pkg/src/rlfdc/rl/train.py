"""Double Q-learning with experience replay over test-selection episodes."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..coverage import Dataset, SuiteContext, action_matrix, candidate_pool
from ..sbfl import best_buggy_rank, buggy_methods, localize, reward
from .network import QModel, forward_batch, init_params, loss_and_grad, make_optimizer
from .replay import ReplayMemory, Transition

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    steps: int = 10  # K, selections per episode
    capacity: int = 100  # N
    sync_every: int = 20  # C
    learn_every: int = 5  # L
    gamma: float = 0.9
    sigma: float = 0.1  # exploration probability
    lr: float = 0.001
    batch_size: int = 32
    epochs: int = 30
    seed: int = 0
    no_embed: bool = False
    regular_q: bool = False
    optimizer: str = "adam"

    def validate(self) -> None:
        if not 0.0 <= self.sigma <= 1.0:
            raise ValueError("sigma must lie in [0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        for name in ("steps", "capacity", "sync_every", "learn_every", "batch_size", "epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.lr > 0:
            raise ValueError("lr must be positive")


def init_model(config: TrainConfig, seed: int | None = None) -> QModel:
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    return QModel(init_params(rng, config.no_embed), config.no_embed, config.regular_q,
                  num_tests_divisor=float(config.steps + 1), config=asdict(config), seed=seed)


def sync_target(model: QModel, target: QModel) -> None:
    """Overwrite the target parameters with copies of the online ones."""
    target.params = {k: v.copy() for k, v in model.params.items()}


# ---------------------------------------------------------------------------
# features as network inputs


def state_input(model: QModel, ctx: SuiteContext) -> np.ndarray:
    _, sizes = ctx.group_labels()
    scope = len(ctx.scope)
    return np.array([(1 + len(ctx.selected)) / model.num_tests_divisor,
                     len(sizes) / scope if scope else 0.0])


def action_inputs(ctx: SuiteContext, rows) -> np.ndarray:
    feats = action_matrix(ctx, rows)
    return feats[:, [0, 2]]


def predict_rows(model: QModel, ctx: SuiteContext, rows) -> np.ndarray:
    """FDC of each candidate coverage row; no test outcome is consulted."""
    rows = np.atleast_2d(np.asarray(rows, dtype=bool))
    if len(rows) == 0:
        return np.zeros(0)
    actions = action_inputs(ctx, rows)
    states = np.repeat(state_input(model, ctx)[None, :], len(rows), axis=0)
    return forward_batch(model.params, states, actions, model.no_embed)


def predict_fdc(model: QModel, ctx: SuiteContext, candidate: int) -> float:
    return float(predict_rows(model, ctx, ctx.coverage_of(candidate)[None, :])[0])


# ---------------------------------------------------------------------------
# learning


def compute_targets(batch: list[Transition], model: QModel, target: QModel,
                    gamma: float) -> np.ndarray:
    """r for terminal transitions, else r + gamma * max_a' Q^(s', a')."""
    bootstrap = model if model.regular_q else target
    y = np.array([t.reward for t in batch], dtype=float)
    live = [i for i, t in enumerate(batch) if not t.terminal and len(t.next_actions)]
    if live:
        states = np.concatenate([np.repeat(batch[i].next_state[None, :], len(batch[i].next_actions), 0)
                                 for i in live])
        actions = np.concatenate([batch[i].next_actions for i in live])
        q = forward_batch(bootstrap.params, states, actions, bootstrap.no_embed)
        bounds = np.cumsum([0] + [len(batch[i].next_actions) for i in live])
        for j, i in enumerate(live):
            y[i] += gamma * q[bounds[j]:bounds[j + 1]].max()
    return y


def train_step(model: QModel, target: QModel, batch: list[Transition], config: TrainConfig,
               optimizer=None) -> float:
    """One minibatch update of ``model`` in place; returns the pre-update loss."""
    if not batch:
        raise ValueError("empty batch")
    if optimizer is None:
        optimizer = make_optimizer("sgd", config.lr)
    y = compute_targets(batch, model, target, config.gamma)
    states = np.stack([t.state for t in batch])
    actions = np.stack([t.action for t in batch])
    loss, grads = loss_and_grad(model.params, states, actions, y, model.no_embed)
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite training loss")
    optimizer.step(model.params, grads)
    return loss


@dataclass
class TrainTrace:
    """Instrumentation hooks filled in by :func:`train`."""

    learn_steps: list[int] = field(default_factory=list)
    sync_steps: list[int] = field(default_factory=list)
    episodes: list[tuple[int, int]] = field(default_factory=list)  # (epoch, dataset index)
    memory_sizes_at_learn: list[int] = field(default_factory=list)
    selections: list[list[int]] = field(default_factory=list)
    targets: list[tuple[bool, float, float]] = field(default_factory=list)  # terminal, r, y
    losses: list[float] = field(default_factory=list)
    memory: ReplayMemory | None = None
    total_steps: int = 0


def check_training_dataset(ds: Dataset, steps: int) -> int:
    if not ds.initial_failing:
        raise ValueError("dataset has no initial failing test")
    if not ds.faults:
        raise ValueError("dataset has no labeled faults")
    failing = ds.initial_failing[0]
    if len(candidate_pool(ds, failing)) < steps:
        raise ValueError(f"dataset needs at least {steps} non-failing candidate tests")
    return failing


def train(datasets: list[Dataset], config: TrainConfig | None = None,
          trace: TrainTrace | None = None) -> QModel:
    config = config or TrainConfig()
    config.validate()
    failing = []
    for i, ds in enumerate(datasets):
        try:
            failing.append(check_training_dataset(ds, config.steps))
        except ValueError as exc:
            raise ValueError(f"training dataset {i}: {exc}") from exc

    model = init_model(config)
    target = model.copy()
    memory = ReplayMemory(config.capacity)
    optimizer = make_optimizer(config.optimizer, config.lr)
    explore_rng = np.random.default_rng([config.seed, 1])
    batch_rng = np.random.default_rng([config.seed, 2])
    if trace is not None:
        trace.memory = memory
    counter = 0

    for epoch in range(config.epochs):
        for di, ds in enumerate(datasets):
            if trace is not None:
                trace.episodes.append((epoch, di))
            ctx = SuiteContext(ds, failing[di])
            pool = candidate_pool(ds, failing[di])
            buggy = buggy_methods(ds)
            init_rank = best_buggy_rank(localize(ds, ctx.tests, ctx.scope), buggy)
            state = state_input(model, ctx)
            actions = action_inputs(ctx, ds.coverage[pool])
            picked = []
            for k in range(config.steps):
                if explore_rng.random() < config.sigma:
                    choice = int(explore_rng.integers(len(pool)))
                else:
                    q = forward_batch(model.params, np.repeat(state[None, :], len(pool), 0),
                                      actions, model.no_embed)
                    choice = int(np.argmax(q))  # first max = lowest test id
                t_sel = pool.pop(choice)
                action = actions[choice]
                ctx.add(t_sel)
                picked.append(t_sel)
                cur_rank = best_buggy_rank(localize(ds, ctx.tests, ctx.scope), buggy)
                r = reward(init_rank, cur_rank)
                next_state = state_input(model, ctx)
                next_actions = action_inputs(ctx, ds.coverage[pool]) if pool else np.zeros((0, 2))
                terminal = k + 1 == config.steps or not pool
                counter += 1
                memory.push(Transition(state, action, r, next_state,
                                       np.zeros((0, 2)) if terminal else next_actions,
                                       terminal, counter, di))
                if memory.full and counter % config.learn_every == 0:
                    batch = memory.sample(batch_rng, config.batch_size)
                    if trace is not None:
                        trace.learn_steps.append(counter)
                        trace.memory_sizes_at_learn.append(len(memory))
                        y = compute_targets(batch, model, target, config.gamma)
                        trace.targets.extend((t.terminal, t.reward, yy) for t, yy in zip(batch, y))
                    loss = train_step(model, target, batch, config, optimizer)
                    if trace is not None:
                        trace.losses.append(loss)
                if counter % config.sync_every == 0:
                    sync_target(model, target)
                    if trace is not None:
                        trace.sync_steps.append(counter)
                state, actions = next_state, next_actions
                if not pool:
                    break
            if trace is not None:
                trace.selections.append(picked)
        log.debug("epoch %d done, %d steps", epoch, counter)

    if trace is not None:
        trace.total_steps = counter
    model.check()
    return model
