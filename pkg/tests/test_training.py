import math

import numpy as np
import pytest

from geomattn import datasets as D
from geomattn import training as TR
from geomattn.models import ModelSpec, build_backmapper, build_crystal_classifier, build_force_regressor
from geomattn.tensor import Tensor


def test_adam_first_step_is_lr_times_sign():
    lr = 1e-3
    for g in (3.0, -0.02):
        p = {"w": np.array([0.5])}
        new, state = TR.adam_step(p, {"w": np.array([g])}, TR.AdamState.zeros(p), lr)
        # m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
        expected = 0.5 - lr * g / (abs(g) + 1e-8)
        assert new["w"][0] == pytest.approx(expected, abs=1e-15)
        assert abs(new["w"][0] - (0.5 - lr * math.copysign(1, g))) < 1e-9
        assert state.step == 1


def test_adam_zero_gradient_keeps_params_and_decays_moments():
    p = {"w": np.array([1.0, -2.0])}
    state = TR.AdamState(3, {"w": np.array([0.1, 0.2])}, {"w": np.array([0.3, 0.4])})
    new, state2 = TR.adam_step(p, {"w": np.zeros(2)}, state, 1e-3)
    np.testing.assert_array_equal(state2.m["w"], 0.9 * state.m["w"])
    np.testing.assert_array_equal(state2.v["w"], 0.999 * state.v["w"])
    p0 = {"w": np.array([1.0])}
    same, _ = TR.adam_step(p0, {"w": np.zeros(1)}, TR.AdamState.zeros(p0), 1e-3)
    np.testing.assert_array_equal(same["w"], p0["w"])


def test_adam_is_deterministic():
    rng = np.random.default_rng(0)
    grads = [{"w": rng.normal(size=(3, 3))} for _ in range(10)]

    def run():
        p = {"w": np.ones((3, 3))}
        s = TR.AdamState.zeros(p)
        for g in grads:
            p, s = TR.adam_step(p, g, s, 1e-2)
        return p["w"]

    np.testing.assert_array_equal(run(), run())


def test_adam_rejects_nan_gradient():
    p = {"layer/kernel": np.ones(2)}
    with pytest.raises(FloatingPointError, match="layer/kernel"):
        TR.adam_step(p, {"layer/kernel": np.array([np.nan, 0.0])}, TR.AdamState.zeros(p), 1e-3)


def test_plateau_strictly_decreasing():
    mult, stop = TR.plateau_schedule(list(range(100, 0, -1)))
    assert all(m == 1.0 for m in mult) and stop is None


def test_plateau_reduction_and_stop():
    mult, stop = TR.plateau_schedule([1.0] * 21)
    assert [i + 1 for i, m in enumerate(mult) if m != 1.0] == [21]
    assert mult[20] == 0.75
    mult, stop = TR.plateau_schedule([1.0] * 51)
    assert stop == 51
    assert [i + 1 for i, m in enumerate(mult) if m != 1.0] == [21, 41]
    _, stop = TR.plateau_schedule([1.0] * 50)
    assert stop is None
    with pytest.raises(ValueError):
        TR.plateau_schedule([])


def test_plateau_improvement_resets_counters():
    history = [1.0] * 15 + [0.5] + [0.5] * 20
    mult, _ = TR.plateau_schedule(history)
    assert [i + 1 for i, m in enumerate(mult) if m != 1.0] == [36]


def test_train_config_validation():
    with pytest.raises(ValueError):
        TR.TrainConfig(plateau_factor=1.0)
    with pytest.raises(ValueError):
        TR.TrainConfig(plateau_patience=0)
    with pytest.raises(ValueError):
        TR.TrainConfig.from_dict({"lr": 1})
    cfg = TR.TrainConfig(seed=4)
    assert TR.TrainConfig.from_dict(cfg.to_dict()) == cfg


def test_loss_examples():
    assert TR.cross_entropy(Tensor(np.zeros((2, 5))), [0, 3]).item() == pytest.approx(math.log(5), abs=1e-15)
    confident = Tensor(np.array([[100.0, 0.0], [0.0, 100.0]]))
    assert TR.cross_entropy(confident, [0, 1]).item() < 1e-40
    assert TR.mse(Tensor(np.array([1.0, 2.0])), np.zeros(2)).item() == 2.5
    assert TR.mse(Tensor(np.ones(3)), np.ones(3)).item() == 0.0
    masked = TR.mse(Tensor(np.array([1.0, 2.0, 9.0])), np.zeros(3), mask=[True, True, False])
    assert masked.item() == 2.5
    with pytest.raises(ValueError):
        TR.mse(Tensor(np.ones(2)), np.zeros(2), mask=[False, False])
    with pytest.raises(ValueError):
        TR.cross_entropy(Tensor(np.zeros((0, 2))), [])


def test_force_mae_examples():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(4, 5, 3))
    assert TR.mean_absolute_force_error(a, a) == 0.0
    assert TR.mean_absolute_force_error(a + 0.25, a) == pytest.approx(0.25, abs=1e-15)
    b = rng.normal(size=(4, 5, 3))
    total, count = 0.0, 0
    for x, y in zip(a.ravel(), b.ravel()):
        total += abs(x - y)
        count += 1
    assert TR.mean_absolute_force_error(a, b) == pytest.approx(total / count, rel=1e-14)
    with pytest.raises(ValueError):
        TR.mean_absolute_force_error(a, b[:2])


def tiny(task, **kw):
    return ModelSpec.defaults(task, working_dim=8, hidden_dim=16, n_blocks=1, **kw)


def test_classifier_training_is_reproducible_and_learns():
    envs = D.make_environment_dataset(["cF4-Cu", "cI2-W"], [1e-3], per_class=40, seed=0, min_particles=128)
    tr, va, _ = D.split_indices(envs.labels)
    cfg = TR.TrainConfig(max_epochs=3, batch_size=16, learning_rate=3e-3)

    def run():
        model = build_crystal_classifier(tiny("classify", num_classes=2, num_types=1, dropout=0.0))
        hist = TR.train_classifier(model, envs.subset(tr), envs.subset(va), cfg)
        return model, hist

    m1, h1 = run()
    _, h2 = run()
    assert h1 == h2
    assert h1[-1]["train_loss"] < h1[0]["train_loss"]
    assert TR.evaluate_classifier(m1, envs.subset(va))["accuracy"] >= 0.5


def test_force_training_reduces_loss():
    data = D.make_force_dataset(16, seed=0)
    model = build_force_regressor(tiny("force", num_types=3))
    before = TR.evaluate_force(model, data)["force_mse"]
    cfg = TR.TrainConfig(max_epochs=15, batch_size=8, learning_rate=3e-3, loss="force_mse")
    hist = TR.train_force(model, data, data, cfg)
    after = TR.evaluate_force(model, data)["force_mse"]
    assert after < before
    assert min(h["val_loss"] for h in hist) == pytest.approx(after)


def test_backmap_training_restores_best_parameters():
    data = D.make_backmap_dataset(8, seed=0)
    model = build_backmapper(tiny("backmap", num_types=4, num_atom_labels=4, refine_blocks=1))
    cfg = TR.TrainConfig(max_epochs=4, batch_size=4, learning_rate=1e-2, loss="coordinate_mse")
    hist = TR.train_backmap(model, data, data, cfg)
    assert TR.evaluate_backmap(model, data)["coord_mse"] == pytest.approx(min(h["val_loss"] for h in hist))


def test_time_budget_stops_early():
    data = D.make_backmap_dataset(4, seed=0)
    model = build_backmapper(tiny("backmap", num_types=4, num_atom_labels=4, refine_blocks=0))
    cfg = TR.TrainConfig(max_epochs=100, batch_size=4, loss="coordinate_mse", max_seconds=0.0)
    assert len(TR.train_backmap(model, data, data, cfg)) == 1
