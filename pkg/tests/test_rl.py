import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import gradient_config, motivating_example, numeric_grad, relative_error, toy_env
from rlfdc.coverage import SuiteContext, candidate_pool, make_dataset
from rlfdc.rl import (ModelError, QModel, ReplayMemory, TrainConfig, TrainTrace, Transition,
                      compute_targets, dumps_model, forward, forward_batch, init_model, layer_shapes,
                      load_model, loss_and_grad, model_from_dict, predict_fdc, predict_rows,
                      save_model, sync_target, train, train_step)
from rlfdc.rl.network import model_to_dict

SMALL = dict(steps=3, capacity=8, sync_every=4, learn_every=2, batch_size=4, epochs=4)


def zero_model(no_embed=False, final_bias=0.0):
    params = {k: np.zeros(s) for k, s in layer_shapes(no_embed).items()}
    params["head3.bias"][0] = final_bias
    return QModel(params, no_embed)


def transition(reward, terminal, next_actions=None):
    nxt = np.zeros((0, 2)) if next_actions is None else np.asarray(next_actions, float)
    return Transition(np.array([0.1, 0.2]), np.array([0.3, 0.4]), reward,
                      np.array([0.2, 0.2]), nxt, terminal)


@pytest.fixture(scope="module")
def toys():
    return [toy_env(s)[0] for s in range(2)]


class TestInit:
    def test_same_seed(self):
        a, b = init_model(TrainConfig(), 5), init_model(TrainConfig(), 5)
        assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)

    def test_bounds(self):
        model = init_model(TrainConfig(), 1)
        shapes = layer_shapes()
        for name, value in model.params.items():
            fan_in = shapes[name.split(".")[0] + ".weight"][1]
            assert np.all(np.abs(value) <= np.sqrt(1 / fan_in))

    def test_head_input(self):
        assert init_model(TrainConfig()).head_input_dim == 18
        assert init_model(TrainConfig(no_embed=True)).head_input_dim == 4
        assert layer_shapes(True)["head1.weight"] == (16, 4)


class TestForward:
    def test_zero_model(self):
        assert forward(zero_model(), [0.3, 0.9], [0.1, 0.5]) == 0.0

    def test_final_bias(self):
        assert forward(zero_model(final_bias=0.3), [0.3, 0.9], [0.1, 0.5]) == 0.3

    def test_hand_computed(self):
        m = zero_model()
        p = m.params
        p["embed1.weight"][0] = [1.0, 2.0]
        p["embed1.bias"][0] = 0.1
        p["embed1.weight"][1] = [-1.0, 0.0]
        p["embed2.weight"][0, :2] = [2.0, 5.0]
        p["embed2.bias"][0] = -0.5
        p["embed2.weight"][1, 0] = -1.0
        p["head1.weight"][0, [0, 16, 17]] = [1.0, 1.0, -1.0]
        p["head1.weight"][1, 17] = 2.0
        p["head1.bias"][1] = -0.2
        p["head2.weight"][0, :2] = [1.0, 0.5]
        p["head2.weight"][1, 1] = -3.0
        p["head3.weight"][0, :2] = [2.0, 7.0]
        p["head3.bias"][0] = 0.1
        # embed: (1.0, 0) -> (1.5, 0); head1: (1.3, 1.0); head2: (1.8, 0); out 2*1.8 + 0.1
        assert forward(m, [0.5, 0.2], [0.4, 0.6]) == pytest.approx(3.7, abs=1e-12)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            forward(zero_model(), [np.nan, 0.0], [0.0, 0.0])


class TestGradients:
    @pytest.mark.parametrize("no_embed", [False, True])
    def test_finite_differences(self, no_embed):
        rng = np.random.default_rng(42 + no_embed)
        for _ in range(5):
            params, s, a, y = gradient_config(rng, no_embed)
            _, analytic = loss_and_grad(params, s, a, y, no_embed)
            assert relative_error(analytic, numeric_grad(params, s, a, y, no_embed)) < 1e-4

    def test_loss_value(self):
        _, s, a, _ = gradient_config(np.random.default_rng(0), False)
        m = zero_model(final_bias=1.0)
        loss, grads = loss_and_grad(m.params, s, a, np.zeros(len(s)))
        assert loss == 1.0
        assert grads["head3.bias"][0] == pytest.approx(2.0)


class TestTargets:
    def test_terminal(self):
        y = compute_targets([transition(0.4, True)], zero_model(), zero_model(final_bias=9.0), 0.9)
        assert y.tolist() == [0.4]

    def test_bootstrap(self):
        y = compute_targets([transition(0.5, False, [[0.1, 0.1], [0.5, 0.5]])],
                            zero_model(), zero_model(final_bias=1.0), 0.9)
        assert y[0] == pytest.approx(1.4)

    def test_max_over_next_actions(self):
        target = zero_model()
        target.params["head1.weight"][0, 16] = 1.0  # Q grows with cover
        target.params["head2.weight"][0, 0] = 1.0
        target.params["head3.weight"][0, 0] = 1.0
        y = compute_targets([transition(0.0, False, [[0.2, 0.0], [0.7, 0.0], [0.4, 0.0]])],
                            zero_model(), target, 1.0)
        assert y[0] == pytest.approx(0.7)

    def test_regular_q_ignores_target(self):
        online = zero_model(final_bias=0.5)
        online.regular_q = True
        batch = [transition(0.1, False, [[0.3, 0.3]])]
        y1 = compute_targets(batch, online, zero_model(final_bias=-4.0), 0.9)
        y2 = compute_targets(batch, online, zero_model(final_bias=7.0), 0.9)
        assert y1[0] == y2[0] == pytest.approx(0.1 + 0.9 * 0.5)

    def test_terminal_ignores_zeroed_target(self):
        rng = np.random.default_rng(3)
        model = init_model(TrainConfig(), 3)
        batch = [transition(float(r), True) for r in rng.random(5)]
        a = compute_targets(batch, model, model.copy(), 0.9)
        b = compute_targets(batch, model, zero_model(), 0.9)
        assert a.tolist() == b.tolist() == [t.reward for t in batch]


class TestTrainStep:
    def test_target_untouched_and_loss_drops(self):
        config = TrainConfig(lr=0.01, optimizer="sgd")
        model = init_model(config, 0)
        target = model.copy()
        before = {k: v.copy() for k, v in target.params.items()}
        batch = [transition(1.0, True) for _ in range(4)]
        first = train_step(model, target, batch, config)
        for _ in range(20):
            last = train_step(model, target, batch, config)
        assert last < first
        assert all(np.array_equal(before[k], target.params[k]) for k in before)

    def test_empty_batch(self):
        model = init_model(TrainConfig())
        with pytest.raises(ValueError):
            train_step(model, model.copy(), [], TrainConfig())

    def test_sync(self):
        model = init_model(TrainConfig(), 1)
        target = init_model(TrainConfig(), 2)
        sync_target(model, target)
        assert all(np.array_equal(model.params[k], target.params[k]) for k in model.params)
        s, a = np.random.default_rng(0).random((2, 5, 2))
        assert np.array_equal(forward_batch(model.params, s, a), forward_batch(target.params, s, a))


class TestReplay:
    def test_fifo(self):
        mem = ReplayMemory(3)
        for i in range(5):
            mem.push(transition(float(i), True))
        assert [t.reward for t in mem] == [2.0, 3.0, 4.0]
        assert len(mem) == 3 and mem.full

    def test_sample_without_replacement(self):
        mem = ReplayMemory(10)
        for i in range(10):
            mem.push(transition(float(i), True))
        got = mem.sample(np.random.default_rng(0), 10)
        assert sorted(t.reward for t in got) == list(range(10))

    def test_capacity(self):
        with pytest.raises(ValueError):
            ReplayMemory(0)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 20), st.integers(0, 60))
    def test_never_exceeds(self, cap, pushes):
        mem = ReplayMemory(cap)
        for i in range(pushes):
            mem.push(transition(float(i), True))
            assert len(mem) <= cap
        assert [t.reward for t in mem] == [float(i) for i in range(max(0, pushes - cap), pushes)]


class TestTrain:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(sigma=1.5).validate()
        with pytest.raises(ValueError):
            TrainConfig(capacity=0).validate()

    def test_dataset_preconditions(self):
        few = make_dataset(["m"] * 2, [[1, 1], [1, 0]], ["fail", "pass"], faults=[0])
        with pytest.raises(ValueError, match="dataset 0"):
            train([few], TrainConfig(**SMALL))
        nofault = make_dataset(["m"] * 2, [[1, 1]] + [[1, 0]] * 4, ["fail"] + ["pass"] * 4)
        with pytest.raises(ValueError, match="faults"):
            train([nofault], TrainConfig(**SMALL))

    def test_mechanics(self, toys):
        trace = TrainTrace()
        config = TrainConfig(**SMALL)
        train(toys, config, trace)
        total = config.epochs * len(toys) * config.steps
        assert trace.total_steps == total
        assert trace.sync_steps == list(range(config.sync_every, total + 1, config.sync_every))
        assert all(n == config.capacity for n in trace.memory_sizes_at_learn)
        assert trace.learn_steps[0] >= config.capacity
        assert all(s % config.learn_every == 0 for s in trace.learn_steps)
        assert trace.episodes == [(e, d) for e in range(config.epochs) for d in range(len(toys))]
        assert [t.step for t in trace.memory] == list(range(total - config.capacity + 1, total + 1))
        for terminal, r, y in trace.targets:
            if terminal:
                assert y == r

    def test_pure_exploration(self, toys):
        config = TrainConfig(**{**SMALL, "sigma": 1.0, "epochs": 2})
        trace = TrainTrace()
        train(toys, config, trace)
        rng = np.random.default_rng([config.seed, 1])
        expected = []
        for _ in range(config.epochs):
            for ds in toys:
                pool = candidate_pool(ds, ds.initial_failing[0])
                picked = []
                for _ in range(config.steps):
                    rng.random()
                    picked.append(pool.pop(int(rng.integers(len(pool)))))
                expected.append(picked)
        assert trace.selections == expected

    def test_deterministic(self, toys):
        config = TrainConfig(**SMALL)
        assert dumps_model(train(toys, config)) == dumps_model(train(toys, config))

    def test_candidates_never_failing(self):
        ds = make_dataset(["m"] * 3, [[1, 1, 1], [1, 0, 0], [0, 1, 0], [1, 1, 0], [0, 0, 1]],
                          ["fail", "fail", "pass", "pass", "pass"], faults=[2])
        trace = TrainTrace()
        train([ds], TrainConfig(**{**SMALL, "steps": 3}), trace)
        assert all(1 not in picked for picked in trace.selections)


class TestPredict:
    def test_identical_coverage(self):
        ds = make_dataset(["m"] * 3, [[1, 1, 0], [1, 0, 0], [1, 0, 0], [0, 1, 1]],
                          ["fail", "pass", "pass", "pass"])
        model = init_model(TrainConfig(), 4)
        ctx = SuiteContext(ds, 0)
        assert predict_fdc(model, ctx, 1) == predict_fdc(model, ctx, 2)

    def test_zero_model(self):
        table = motivating_example()
        values = predict_rows(zero_model(final_bias=0.25), SuiteContext(table, 0), table.coverage[1:])
        assert np.all(values == 0.25)

    def test_suite_member(self):
        table = motivating_example()
        with pytest.raises(ValueError):
            predict_fdc(init_model(TrainConfig()), SuiteContext(table, 0, [3]), 3)

    def test_pool_independent(self):
        table = motivating_example()
        model = init_model(TrainConfig(), 9)
        ctx = SuiteContext(table, 0, [1])
        alone = predict_rows(model, ctx, table.coverage[[5]])[0]
        among = predict_rows(model, ctx, table.coverage[[9, 5, 2]])[1]
        assert alone == among


class TestPersistence:
    @pytest.mark.parametrize("variant", [{}, {"no_embed": True}, {"regular_q": True}])
    def test_round_trip(self, tmp_path, variant):
        model = init_model(TrainConfig(**variant), 11)
        path = tmp_path / "m.json"
        save_model(model, path)
        loaded = load_model(path)
        s, a = np.random.default_rng(1).random((2, 100, 2))
        assert np.array_equal(forward_batch(model.params, s, a, model.no_embed),
                              forward_batch(loaded.params, s, a, loaded.no_embed))
        assert (loaded.no_embed, loaded.regular_q) == (model.no_embed, model.regular_q)
        assert dumps_model(loaded) == path.read_text()

    def test_no_embed_head(self, tmp_path):
        save_model(init_model(TrainConfig(no_embed=True)), tmp_path / "m.json")
        assert load_model(tmp_path / "m.json").head_input_dim == 4

    def test_tampered_shape(self):
        doc = model_to_dict(init_model(TrainConfig()))
        doc["params"]["head1.weight"]["shape"] = [18, 16]
        with pytest.raises(ModelError):
            model_from_dict(doc)

    def test_version(self):
        doc = model_to_dict(init_model(TrainConfig()))
        doc["version"] = 2
        with pytest.raises(ModelError, match="version"):
            model_from_dict(doc)

    def test_non_finite(self):
        doc = json.loads(dumps_model(init_model(TrainConfig())))
        doc["params"]["head3.bias"]["data"] = [float("inf")]
        with pytest.raises(ModelError, match="non-finite"):
            model_from_dict(doc)

    def test_bad_json(self, tmp_path):
        (tmp_path / "m.json").write_text("{")
        with pytest.raises(ModelError):
            load_model(tmp_path / "m.json")
