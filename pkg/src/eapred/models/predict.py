from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from eapred import numerics as nx
from eapred.models.nets import FORWARD, attention_logits, lstm_logits, logreg_logits


@dataclass(frozen=True)
class Prediction:
    class_probs: tuple
    predicted_class: int


def _to_predictions(logit_tensor):
    probs = nx.softmax(logit_tensor, axis=-1).data
    # np.argmax returns the first maximum, i.e. the lowest class index on ties
    return [Prediction(tuple(float(p) for p in row), int(np.argmax(row))) for row in probs]


def _single(fn, window, params, mode="eval", rng=None):
    preds = _to_predictions(fn(params, window, training=(mode == "train"), rng=rng))
    return preds[0] if np.asarray(window).ndim == 2 else preds


def logreg_forward(window, params):
    return _single(logreg_logits, window, params)


def lstm_forward(window, params, mode="eval", rng=None):
    return _single(lstm_logits, window, params, mode, rng)


def attention_forward(window, params, mode="eval", rng=None):
    return _single(attention_logits, window, params, mode, rng)


def predict_proba(params, X, batch_size=256):
    """Eval-mode class probabilities for a (N, T, d) array."""
    X = np.asarray(X, dtype=np.float64)
    fn = FORWARD[params.config.kind]
    out = []
    for start in range(0, len(X), batch_size):
        out.append(nx.softmax(fn(params, X[start : start + batch_size]), axis=-1).data)
    if not out:
        return np.zeros((0, params.config.classes))
    return np.concatenate(out)


def predict(params, X, batch_size=256):
    return np.argmax(predict_proba(params, X, batch_size), axis=1)
