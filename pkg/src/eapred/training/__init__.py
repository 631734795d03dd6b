"""Weighted cross-entropy, Adam and the training loop."""

from eapred.training.adam import AdamState, adam_step
from eapred.training.loop import (
    EpochRecord,
    TrainConfig,
    TrainLog,
    dataset_loss,
    epoch_permutation,
    train,
    train_accuracy,
)
from eapred.training.loss import PROB_FLOOR, LossSpec, class_weights, weighted_ce, weighted_ce_logits

__all__ = [
    "PROB_FLOOR",
    "AdamState",
    "EpochRecord",
    "LossSpec",
    "TrainConfig",
    "TrainLog",
    "adam_step",
    "class_weights",
    "dataset_loss",
    "epoch_permutation",
    "train",
    "train_accuracy",
    "weighted_ce",
    "weighted_ce_logits",
]
