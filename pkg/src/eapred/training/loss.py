from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from eapred import numerics as nx
from eapred.errors import ConfigError, DomainError

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class LossSpec:
    weights: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        if len(w) != 3 or any(not x > 0 for x in w):
            raise ConfigError(f"class weights must be three positive numbers, got {self.weights}")

    @property
    def ordered(self):
        w0, w1, w2 = self.weights
        return w0 >= w2 and w1 >= w2


def class_weights(distribution=None, mode="inverse-frequency", manual=None, override=False):
    """Inverse-frequency weights ``N / (3 N_k)``, or validated manual weights."""
    if mode == "inverse-frequency":
        counts = distribution.counts
        if any(c == 0 for c in counts):
            raise ConfigError(f"class counts {counts} include an empty class; pass manual weights instead")
        n = sum(counts)
        return LossSpec(tuple(n / (3.0 * c) for c in counts))
    if mode == "manual":
        spec = LossSpec(tuple(manual))
        if not spec.ordered:
            if not override:
                raise ConfigError(f"manual weights {spec.weights} violate w_UP, w_DOWN >= w_NEUTRAL")
            log.warning("proceeding with weights %s that violate w_UP, w_DOWN >= w_NEUTRAL", spec.weights)
        return spec
    raise ConfigError(f"unknown class-weight mode {mode!r}")


def weighted_ce(probs, targets, spec):
    """Mean over the batch of ``-w[y] * log(max(p[y], 1e-12))``.

    ``probs`` is a (B, 3) tensor, typically the output of a softmax, so the
    gradient reaches the logits through it.
    """
    probs = nx.as_tensor(probs)
    if probs.ndim == 1:
        probs = nx.reshape(probs, (1, -1))
    targets = np.atleast_1d(np.asarray(targets))
    if targets.dtype.kind not in "iu" or np.any((targets < 0) | (targets > 2)):
        raise DomainError(f"class index must be 0, 1 or 2, got {targets.tolist()}")
    w = np.asarray(spec.weights)[targets]
    picked = nx.clamp_min(nx.pick(probs, targets), PROB_FLOOR)
    return nx.mean(nx.mul(nx.neg(nx.log(picked)), w))


def weighted_ce_logits(logit_tensor, targets, spec):
    return weighted_ce(nx.softmax(logit_tensor, axis=-1), targets, spec)
