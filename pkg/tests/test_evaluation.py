import json

import numpy as np
import pytest

from eapred.errors import ComparabilityError, ConfigError, InputError
from eapred.evaluation import (
    DEFAULT_COSTS,
    EvaluationReport,
    ablation_report,
    confusion,
    cost_matrix,
    custom_cost,
    format_table,
    metrics,
    write_confusion_csv,
)


def tally(y_true, y_pred):
    cm = [[0] * 3 for _ in range(3)]
    for t, p in zip(y_true, y_pred):
        cm[t][p] += 1
    return cm


def definition_metrics(cm):
    """Oracle written from the textbook definitions with the zero-denominator rule."""
    n = sum(map(sum, cm))
    prec, rec, f1 = [], [], []
    for k in range(3):
        tp = cm[k][k]
        col = sum(cm[i][k] for i in range(3))
        row = sum(cm[k])
        p = tp / col if col else 0.0
        r = tp / row if row else 0.0
        prec.append(p)
        rec.append(r)
        f1.append(2 * p * r / (p + r) if p + r else 0.0)
    return sum(cm[k][k] for k in range(3)) / n, prec, rec, f1, sum(f1) / 3


class TestConfusion:
    def test_perfect_diagonal(self):
        y = [0, 1, 2, 2]
        assert confusion(y, y).tolist() == [[1, 0, 0], [0, 1, 0], [0, 0, 2]]

    def test_single_off_diagonal(self):
        assert confusion([0], [1])[0, 1] == 1

    def test_tally_oracle(self):
        rng = np.random.default_rng(0)
        t, p = rng.integers(0, 3, 1000), rng.integers(0, 3, 1000)
        assert confusion(t, p).tolist() == tally(t.tolist(), p.tolist())

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            confusion([0, 1], [0])

    def test_out_of_range(self):
        with pytest.raises(InputError):
            confusion([0, 3], [0, 1])


class TestMetrics:
    def test_identity(self):
        m = metrics(np.eye(3, dtype=int))
        assert m.accuracy == 1.0 and m.macro_f1 == 1.0

    def test_never_predicts_up(self):
        cm = np.array([[0, 3, 2], [0, 4, 1], [0, 2, 8]])
        m = metrics(cm)
        assert m.precision[0] == 0.0 and m.f1[0] == 0.0

    def test_definition_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            cm = rng.integers(0, 50, (3, 3))
            cm[rng.uniform(size=(3, 3)) < 0.2] = 0
            if cm.sum() == 0:
                continue
            acc, prec, rec, f1, macro = definition_metrics(cm.tolist())
            m = metrics(cm)
            assert abs(m.accuracy - acc) <= 1e-12 and abs(m.macro_f1 - macro) <= 1e-12
            np.testing.assert_allclose(m.precision, prec, rtol=0, atol=1e-12)
            np.testing.assert_allclose(m.recall, rec, rtol=0, atol=1e-12)
            np.testing.assert_allclose(m.f1, f1, rtol=0, atol=1e-12)

    def test_empty(self):
        with pytest.raises(InputError):
            metrics(np.zeros((3, 3), int))

    def test_permutation_invariance(self):
        rng = np.random.default_rng(2)
        t, p = rng.integers(0, 3, 300), rng.integers(0, 3, 300)
        perm = rng.permutation(300)
        assert metrics(confusion(t, p)) == metrics(confusion(t[perm], p[perm]))


class TestCost:
    def test_default_matrix(self):
        np.testing.assert_array_equal(cost_matrix(), DEFAULT_COSTS)
        assert np.all(np.diag(DEFAULT_COSTS) == 0)

    def test_perfect_zero(self):
        assert custom_cost(np.diag([3, 4, 5])) == 0.0

    def test_up_as_down(self):
        assert custom_cost(confusion([0], [1])) == 3.0

    def test_two_sample_average(self):
        assert custom_cost(confusion([0, 2], [0, 0])) == 0.5

    def test_all_ones_equals_error_rate(self):
        ones = cost_matrix(1.0, 1.0)
        rng = np.random.default_rng(3)
        for _ in range(100):
            cm = rng.integers(0, 30, (3, 3))
            if cm.sum():
                assert custom_cost(cm, ones) == pytest.approx(1 - metrics(cm).accuracy, abs=1e-15)

    def test_negative_cost(self):
        with pytest.raises(ConfigError):
            custom_cost(np.eye(3, dtype=int), -DEFAULT_COSTS)


def report(cm, **md):
    base = {"model_kind": "lstm", "split_digest": "abc", "with_sentiment": True}
    return EvaluationReport.from_confusion(np.array(cm), **{**base, **md})


class TestReport:
    def test_recompute_exact(self):
        r = report([[5, 1, 2], [0, 3, 4], [6, 2, 20]], seed=0, tau=0.03)
        assert r.recompute() == r

    def test_json_roundtrip(self):
        r = report([[5, 1, 2], [0, 3, 4], [6, 2, 20]])
        back = EvaluationReport.from_dict(json.loads(r.to_json()))
        assert back == r and r.to_json() == back.to_json()

    def test_table_columns(self):
        txt = format_table([report(np.eye(3, dtype=int) * 4, model_kind="attention")])
        head, rule, row = txt.splitlines()
        assert "Macro-F1" in head and "Custom Cost" in head and set(rule) <= {"-", " "}
        assert row.split()[:3] == ["attention", "yes", "100.000"]

    def test_confusion_csv(self, tmp_path):
        write_confusion_csv(tmp_path / "c.csv", [[1, 2, 3], [4, 5, 6], [7, 8, 9]])
        lines = (tmp_path / "c.csv").read_text().splitlines()
        assert lines[0] == "true\\pred,UP,DOWN,NEUTRAL" and lines[2] == "DOWN,4,5,6"


class TestAblation:
    def test_identical_zero_deltas(self):
        r = report([[5, 1, 2], [0, 3, 4], [6, 2, 20]])
        out = ablation_report(r, r)
        assert all(v == 0 for v in out["delta"].values())
        assert set(out["favours"].values()) == {"tie"}

    def _with_metric(self, **values):
        r = report(np.eye(3, dtype=int))
        for k, v in values.items():
            setattr(r, k, v)
        return r

    def test_macro_f1_favours_sentiment(self):
        out = ablation_report(self._with_metric(macro_f1=0.390), self._with_metric(macro_f1=0.359))
        assert out["delta"]["macro_f1"] == pytest.approx(0.031, abs=1e-12)
        assert out["favours"]["macro_f1"] == "with_sentiment"

    def test_lower_cost_favours_sentiment(self):
        out = ablation_report(self._with_metric(custom_cost=0.651), self._with_metric(custom_cost=0.914))
        assert out["delta"]["custom_cost"] == pytest.approx(-0.263, abs=1e-12)
        assert out["favours"]["custom_cost"] == "with_sentiment"

    def test_mismatched_split(self):
        with pytest.raises(ComparabilityError):
            ablation_report(report(np.eye(3, dtype=int)), report(np.eye(3, dtype=int), split_digest="zzz"))

    def test_mismatched_kind(self):
        with pytest.raises(ComparabilityError):
            ablation_report(report(np.eye(3, dtype=int)), report(np.eye(3, dtype=int), model_kind="logreg"))
