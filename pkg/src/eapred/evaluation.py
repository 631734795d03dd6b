"""Confusion matrices, classification metrics, asymmetric cost and ablation deltas.

Zero-denominator convention: precision, recall and F1 of a class are 0 when
their denominator is 0 (e.g. a model that never predicts UP has UP precision 0).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from eapred.errors import ComparabilityError, ConfigError, InputError
from eapred.labeling import CLASS_NAMES

DEFAULT_COSTS = np.array(
    [
        [0.0, 3.0, 1.0],
        [3.0, 0.0, 1.0],
        [1.0, 1.0, 0.0],
    ]
)


def cost_matrix(directional=3.0, other=1.0):
    c = np.full((3, 3), float(other))
    np.fill_diagonal(c, 0.0)
    c[0, 1] = c[1, 0] = float(directional)
    return c


def confusion(y_true, y_pred, classes=3):
    """Counts with rows = true class, columns = predicted class."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise InputError(f"label and prediction lengths differ: {y_true.shape} vs {y_pred.shape}")
    for arr in (y_true, y_pred):
        if arr.size and (arr.min() < 0 or arr.max() >= classes):
            raise InputError(f"labels must lie in 0..{classes - 1}")
    cm = np.zeros((classes, classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: tuple
    recall: tuple
    f1: tuple
    macro_f1: float


def _safe_div(num, den):
    return np.divide(num, den, out=np.zeros_like(num, dtype=np.float64), where=den != 0)


def metrics(cm):
    cm = np.asarray(cm, dtype=np.int64)
    total = cm.sum()
    if total <= 0:
        raise InputError("metrics of an empty confusion matrix")
    tp = np.diag(cm).astype(np.float64)
    precision = _safe_div(tp, cm.sum(axis=0).astype(np.float64))
    recall = _safe_div(tp, cm.sum(axis=1).astype(np.float64))
    f1 = _safe_div(2.0 * precision * recall, precision + recall)
    return Metrics(
        accuracy=float(tp.sum() / total),
        precision=tuple(float(x) for x in precision),
        recall=tuple(float(x) for x in recall),
        f1=tuple(float(x) for x in f1),
        macro_f1=float(f1.mean()),
    )


def custom_cost(cm, costs=DEFAULT_COSTS):
    """Average per-sample cost of the confusion matrix under ``costs``."""
    costs = np.asarray(costs, dtype=np.float64)
    if np.any(costs < 0):
        raise ConfigError("cost matrix entries must be non-negative")
    cm = np.asarray(cm, dtype=np.int64)
    total = cm.sum()
    if total <= 0:
        raise InputError("cost of an empty confusion matrix")
    return float((cm * costs).sum() / total)


@dataclass
class EvaluationReport:
    confusion: list
    accuracy: float
    precision: list
    recall: list
    f1: list
    macro_f1: float
    custom_cost: float
    cost_matrix: list
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_confusion(cls, cm, costs=DEFAULT_COSTS, **metadata):
        m = metrics(cm)
        return cls(
            confusion=np.asarray(cm).astype(int).tolist(),
            accuracy=m.accuracy,
            precision=list(m.precision),
            recall=list(m.recall),
            f1=list(m.f1),
            macro_f1=m.macro_f1,
            custom_cost=custom_cost(cm, costs),
            cost_matrix=np.asarray(costs, dtype=float).tolist(),
            metadata=dict(metadata),
        )

    def recompute(self):
        return EvaluationReport.from_confusion(np.array(self.confusion), np.array(self.cost_matrix), **self.metadata)

    def to_dict(self):
        return {
            "confusion": self.confusion,
            "accuracy": self.accuracy,
            "precision": dict(zip(CLASS_NAMES, self.precision)),
            "recall": dict(zip(CLASS_NAMES, self.recall)),
            "f1": dict(zip(CLASS_NAMES, self.f1)),
            "macro_f1": self.macro_f1,
            "custom_cost": self.custom_cost,
            "cost_matrix": self.cost_matrix,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            confusion=d["confusion"],
            accuracy=d["accuracy"],
            precision=[d["precision"][c] for c in CLASS_NAMES],
            recall=[d["recall"][c] for c in CLASS_NAMES],
            f1=[d["f1"][c] for c in CLASS_NAMES],
            macro_f1=d["macro_f1"],
            custom_cost=d["custom_cost"],
            cost_matrix=d["cost_matrix"],
            metadata=d.get("metadata", {}),
        )

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


TABLE_HEADER = ("Model", "Sent.", "Acc. (%)", "Macro-F1", "Prec. (UP)", "Prec. (DOWN)", "Custom Cost")


def format_table(reports):
    """Plain-text table with one row per report."""
    rows = [TABLE_HEADER]
    for r in reports:
        md = r.metadata
        rows.append(
            (
                str(md.get("model_kind", "?")),
                "yes" if md.get("with_sentiment", True) else "no",
                f"{100 * r.accuracy:.3f}",
                f"{r.macro_f1:.3f}",
                f"{r.precision[0]:.3f}",
                f"{r.precision[1]:.3f}",
                f"{r.custom_cost:.3f}",
            )
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(TABLE_HEADER))]
    lines = []
    for k, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths))))
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def write_confusion_csv(path, cm):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["true\\pred", *CLASS_NAMES])
        for name, row in zip(CLASS_NAMES, np.asarray(cm).tolist()):
            w.writerow([name, *row])


ABLATION_METRICS = ("accuracy", "macro_f1", "precision_up", "precision_down", "custom_cost")
_HIGHER_IS_BETTER = {"accuracy": True, "macro_f1": True, "precision_up": True, "precision_down": True, "custom_cost": False}


def _metric_values(report):
    return {
        "accuracy": report.accuracy,
        "macro_f1": report.macro_f1,
        "precision_up": report.precision[0],
        "precision_down": report.precision[1],
        "custom_cost": report.custom_cost,
    }


def ablation_report(report_with, report_without):
    """Per-metric ``with - without`` deltas and which side each metric favours."""
    a, b = report_with.metadata, report_without.metadata
    if a.get("model_kind") != b.get("model_kind"):
        raise ComparabilityError(f"model kinds differ: {a.get('model_kind')} vs {b.get('model_kind')}")
    if a.get("split_digest") != b.get("split_digest"):
        raise ComparabilityError("reports were computed on different splits")
    va, vb = _metric_values(report_with), _metric_values(report_without)
    deltas, favours = {}, {}
    for k in ABLATION_METRICS:
        d = va[k] - vb[k]
        deltas[k] = d
        if d == 0:
            favours[k] = "tie"
        elif (d > 0) == _HIGHER_IS_BETTER[k]:
            favours[k] = "with_sentiment"
        else:
            favours[k] = "without_sentiment"
    return {
        "model_kind": a.get("model_kind"),
        "split_digest": a.get("split_digest"),
        "with_sentiment": va,
        "without_sentiment": vb,
        "delta": deltas,
        "favours": favours,
    }
