from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from eapred.errors import NumericalError


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    @classmethod
    def like(cls, arrays):
        return cls(0, {k: np.zeros_like(a) for k, a in arrays.items()}, {k: np.zeros_like(a) for k, a in arrays.items()})


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """In-place Adam update of the ``params`` arrays; returns the advanced state.

    ``params`` and ``grads`` map names to numpy arrays of equal shape.
    """
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NumericalError(f"non-finite gradient for {name}")
    state.step += 1
    t = state.step
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, p in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return state
