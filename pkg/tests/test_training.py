import logging
import math

import numpy as np
import pytest

from eapred.errors import ConfigError, DomainError, NumericalError, TrainingAbort
from eapred.labeling import ClassDistribution
from eapred.models import ModelConfig, init_params, load_params
from eapred.numerics import Tensor
from eapred.training import (
    AdamState,
    LossSpec,
    TrainConfig,
    TrainLog,
    adam_step,
    class_weights,
    dataset_loss,
    epoch_permutation,
    train,
    weighted_ce,
    weighted_ce_logits,
)
from eapred.training import loop as loop_mod


def dist(counts):
    n = sum(counts)
    return ClassDistribution(tuple(counts), tuple(c / n for c in counts))


def memo_set(seed=0):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(32, 30, 21)), np.array([0] * 8 + [1] * 8 + [2] * 16)


class TestClassWeights:
    def test_balanced(self):
        assert class_weights(dist((100, 100, 100))).weights == (1.0, 1.0, 1.0)

    def test_two_thirds_neutral_share(self):
        w = class_weights(dist((165, 165, 670))).weights
        assert w == pytest.approx((1000 / 495, 1000 / 495, 1000 / 2010), abs=1e-12)
        assert round(w[0], 3) == 2.020 and round(w[2], 3) == 0.498
        assert LossSpec(w).ordered

    def test_zero_count(self):
        with pytest.raises(ConfigError, match="manual"):
            class_weights(dist((0, 10, 10)))

    def test_manual_violation(self, caplog):
        with pytest.raises(ConfigError):
            class_weights(mode="manual", manual=(1, 1, 2))
        with caplog.at_level(logging.WARNING):
            spec = class_weights(mode="manual", manual=(1, 1, 2), override=True)
        assert spec.weights == (1.0, 1.0, 2.0) and "violate" in caplog.text

    def test_nonpositive(self):
        with pytest.raises(ConfigError):
            LossSpec((1, 0, 1))


class TestWeightedCE:
    def test_confident_correct(self):
        assert weighted_ce(np.array([[1.0, 0.0, 0.0]]), [0], LossSpec()).item() == pytest.approx(0.0, abs=1e-15)

    def test_hand_value(self):
        loss = weighted_ce(np.array([[0.5, 0.25, 0.25]]), [0], LossSpec((2, 1, 1))).item()
        assert loss == pytest.approx(2 * math.log(2), abs=1e-15)

    def test_linear_in_weight(self):
        p = np.array([[0.2, 0.3, 0.5]])
        a = weighted_ce(p, [1], LossSpec((1, 1.5, 1))).item()
        b = weighted_ce(p, [1], LossSpec((1, 3.0, 1))).item()
        assert b == 2 * a

    def test_uniform_is_w_ln3(self):
        for k, w in enumerate((2.5, 1.75, 0.5)):
            spec = LossSpec((2.5, 1.75, 0.5))
            assert weighted_ce_logits(np.zeros((1, 3)), [k], spec).item() == pytest.approx(w * math.log(3), rel=1e-15)

    def test_clamp_keeps_loss_finite(self):
        loss = weighted_ce(np.array([[1.0, 0.0, 0.0]]), [1], LossSpec()).item()
        assert loss == pytest.approx(-math.log(1e-12))

    @pytest.mark.parametrize("bad", [[3], [-1]])
    def test_bad_index(self, bad):
        with pytest.raises(DomainError):
            weighted_ce(np.array([[0.2, 0.3, 0.5]]), bad, LossSpec())

    def test_logit_gradient_closed_form(self):
        rng = np.random.default_rng(3)
        z0 = rng.normal(size=(5, 3))
        y = rng.integers(0, 3, 5)
        spec = LossSpec((2.0, 1.5, 0.5))
        z = Tensor(z0.copy(), requires_grad=True)
        weighted_ce_logits(z, y, spec).backward()
        e = np.exp(z0 - z0.max(1, keepdims=True))
        p = e / e.sum(1, keepdims=True)
        onehot = np.eye(3)[y]
        w = np.array(spec.weights)[y][:, None]
        np.testing.assert_allclose(z.grad, w * (p - onehot) / 5, rtol=0, atol=1e-14)

        def f(m):
            pm = np.exp(m - m.max(1, keepdims=True))
            pm /= pm.sum(1, keepdims=True)
            return np.mean(-np.array(spec.weights)[y] * np.log(pm[np.arange(5), y]))

        num = np.zeros_like(z0)
        for i in np.ndindex(z0.shape):
            up, dn = z0.copy(), z0.copy()
            up[i] += 1e-5
            dn[i] -= 1e-5
            num[i] = (f(up) - f(dn)) / 2e-5
        np.testing.assert_allclose(z.grad, num, rtol=1e-6, atol=1e-10)


def adam_reference(p, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    m = np.zeros_like(p)
    v = np.zeros_like(p)
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p = p - lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
    return p


class TestAdam:
    def test_first_step_sign(self):
        g = np.array([0.3, -2.0, 1e-3, -7.0])
        p = {"w": np.zeros(4)}
        adam_step(p, {"w": g}, AdamState.like(p), lr=0.01)
        np.testing.assert_allclose(p["w"], -0.01 * np.sign(g), rtol=1e-4)

    def test_zero_grad_noop(self):
        p = {"w": np.arange(3.0)}
        adam_step(p, {"w": np.zeros(3)}, AdamState.like(p), lr=0.1)
        np.testing.assert_array_equal(p["w"], np.arange(3.0))

    def test_reference_trajectory(self):
        rng = np.random.default_rng(0)
        grads = [rng.normal(size=(2, 3)) for _ in range(10)]
        p0 = rng.normal(size=(2, 3))
        p = {"w": p0.copy()}
        state = AdamState.like(p)
        for g in grads:
            adam_step(p, {"w": g}, state, lr=1e-2)
        np.testing.assert_allclose(p["w"], adam_reference(p0, grads, 1e-2), rtol=0, atol=1e-14)
        assert state.step == 10

    def test_identical_steps_identical(self):
        def run():
            p = {"w": np.ones(4)}
            s = AdamState.like(p)
            adam_step(p, {"w": np.array([1.0, -1, 2, 0])}, s, 1e-3)
            return p["w"], s.m["w"], s.v["w"]

        for a, b in zip(run(), run()):
            assert a.tobytes() == b.tobytes()

    def test_nonfinite_grad(self):
        p = {"w": np.ones(2)}
        with pytest.raises(NumericalError):
            adam_step(p, {"w": np.array([np.nan, 0.0])}, AdamState.like(p), 1e-3)
        np.testing.assert_array_equal(p["w"], np.ones(2))


class TestTrain:
    def test_lr_zero_bitwise_unchanged(self):
        X, y = memo_set()
        cfg = ModelConfig(kind="lstm", hidden=8)
        before = init_params(cfg).arrays()
        params, _ = train(cfg, (X, y), LossSpec(), TrainConfig(learning_rate=0.0, epochs=2))
        for k, v in before.items():
            assert params[k].data.tobytes() == v.tobytes()

    def test_same_seed_identical(self):
        X, y = memo_set()
        cfg = ModelConfig(kind="attention", model_dim=8, heads=2, ff_dim=16)
        runs = [train(cfg, (X, y), LossSpec((2, 2, 1)), TrainConfig(learning_rate=1e-3, epochs=3), val_data=(X, y)) for _ in range(2)]
        (p1, l1), (p2, l2) = runs
        assert l1.deterministic_view() == l2.deterministic_view()
        for k in p1:
            assert p1[k].data.tobytes() == p2[k].data.tobytes()

    def test_step_count_keeps_partial_batch(self, monkeypatch):
        calls = []
        real = loop_mod.adam_step

        def counting(params, grads, state, *a):
            calls.append(len(grads))
            return real(params, grads, state, *a)

        monkeypatch.setattr(loop_mod, "adam_step", counting)
        X, y = memo_set()
        train("logreg", (X[:21], y[:21]), LossSpec(), TrainConfig(epochs=3, batch_size=8))
        assert len(calls) == 3 * math.ceil(21 / 8)

    def test_shuffle_depends_only_on_seed_and_epoch(self):
        a = epoch_permutation(7, 3, 50)
        assert np.array_equal(a, epoch_permutation(7, 3, 50))
        assert not np.array_equal(a, epoch_permutation(7, 4, 50))
        assert not np.array_equal(a, epoch_permutation(8, 3, 50))
        assert sorted(a) == list(range(50))

    def test_log_one_entry_per_epoch(self, tmp_path):
        X, y = memo_set()
        _, log = train("logreg", (X, y), LossSpec(), TrainConfig(epochs=4), val_data=(X[:8], y[:8]))
        assert [r.epoch for r in log.epochs] == [1, 2, 3, 4]
        assert all(r.val_loss is not None and 0 <= r.val_macro_f1 <= 1 for r in log.epochs)
        log.write_jsonl(tmp_path / "log.jsonl")
        assert TrainLog.read_jsonl(tmp_path / "log.jsonl").epochs == log.epochs

    def test_checkpoint_cadence(self, tmp_path):
        X, y = memo_set()
        train("logreg", (X, y), LossSpec(), TrainConfig(epochs=5, checkpoint_every=2), run_dir=tmp_path)
        names = sorted(p.name for p in (tmp_path / "checkpoints").iterdir())
        assert names == ["epoch_002.ckpt", "epoch_004.ckpt"]
        load_params(tmp_path / "checkpoints" / names[0])

    def test_nonfinite_abort_diagnostic(self):
        X, y = memo_set()
        X = X.copy()
        X[5, 0, 0] = np.inf
        with pytest.raises(TrainingAbort) as err:
            train("logreg", (X, y), LossSpec(), TrainConfig(epochs=1, batch_size=8))
        assert 5 in err.value.batch_ids and err.value.param_norm > 0

    def test_config_validation(self):
        for bad in ({"epochs": 0}, {"batch_size": 0}, {"optimizer": "sgd"}, {"beta1": 1.0}):
            with pytest.raises(ConfigError):
                TrainConfig(**bad)

    def test_lbfgs_baseline_reduces_loss(self):
        X, y = memo_set()
        cfg = ModelConfig(kind="logreg")
        start = dataset_loss(init_params(cfg), X, y, LossSpec())
        params, log = train(cfg, (X, y), LossSpec(), TrainConfig(optimizer="lbfgs", lbfgs_maxiter=50))
        assert len(log.epochs) == 1
        assert dataset_loss(params, X, y, LossSpec()) < 0.1 * start

    @pytest.mark.parametrize("kind", ["logreg", "lstm", "attention"])
    def test_loss_mostly_non_increasing(self, kind):
        X, y = memo_set()
        fractions = []
        for seed in range(5):
            _, log = train(
                ModelConfig(kind=kind, seed=seed), (X, y), LossSpec((2, 2, 1)), TrainConfig(learning_rate=1e-3, epochs=30, seed=seed)
            )
            losses = np.array([r.train_loss for r in log.epochs])
            fractions.append(np.mean(np.diff(losses) <= 0))
        assert np.mean(fractions) >= 0.9
