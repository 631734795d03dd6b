"""Logistic-regression, stacked-LSTM and self-attention classifiers."""

from eapred.models.config import KINDS, ModelConfig, reduced_config
from eapred.models.nets import attention_logits, logits, logreg_logits, lstm_logits, positional_encoding
from eapred.models.params import (
    ModelParams,
    expected_param_count,
    init_params,
    load_params,
    param_shapes,
    save_params,
    zero_params,
)
from eapred.models.predict import (
    Prediction,
    attention_forward,
    logreg_forward,
    lstm_forward,
    predict,
    predict_proba,
)

__all__ = [
    "KINDS",
    "ModelConfig",
    "ModelParams",
    "Prediction",
    "attention_forward",
    "attention_logits",
    "expected_param_count",
    "init_params",
    "load_params",
    "logits",
    "logreg_forward",
    "logreg_logits",
    "lstm_forward",
    "lstm_logits",
    "param_shapes",
    "positional_encoding",
    "predict",
    "predict_proba",
    "reduced_config",
    "save_params",
    "zero_params",
]
