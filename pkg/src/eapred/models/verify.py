"""Finite-difference verification of every model's analytic gradients."""

from __future__ import annotations

from eapred.models.config import KINDS, reduced_config
from eapred.models.nets import logits
from eapred.models.params import init_params
from eapred.numerics import RngStream, gradient_check
from eapred.training.loss import LossSpec, weighted_ce_logits


def model_gradcheck(kind, batch=3, seed=0, step=1e-5, tolerance=1e-4, max_entries=None, **config):
    """Check d(weighted CE)/d(theta) for one reduced-size model (dropout off)."""
    cfg = reduced_config(kind, seed=seed, **config)
    params = init_params(cfg)
    rng = RngStream(seed).substream("gradcheck", kind)
    X = rng.normal((batch, cfg.seq_len, cfg.input_dim))
    y = rng.integers(0, cfg.classes, shape=batch)
    spec = LossSpec((2.0, 2.5, 0.75))

    def f():
        return weighted_ce_logits(logits(params, X), y, spec)

    return gradient_check(f, dict(params.items()), step=step, tolerance=tolerance, max_entries=max_entries, rng=rng)


def verify_all(kinds=KINDS, **kw):
    return {k: model_gradcheck(k, **kw) for k in kinds}
