"""Central-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from eapred.errors import NumericalError, ProbeError

# below this magnitude the relative error is measured against the floor instead,
# since central differences carry ~1e-11 absolute round-off at step 1e-5
ABS_FLOOR = 1e-6


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    checked: int
    per_param: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.max_rel_error <= self.tolerance

    def worst(self):
        return max(self.per_param.items(), key=lambda kv: kv[1], default=(None, 0.0))


def relative_error(analytic, numeric, floor=ABS_FLOOR):
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def gradient_check(f, params, step=1e-5, tolerance=1e-4, max_entries=None, rng=None, floor=ABS_FLOOR):
    """Compare ``backward()`` gradients of the scalar ``f()`` against central differences.

    ``params`` maps names to leaf tensors that ``f`` reads.  With
    ``max_entries`` set, at most that many coordinates per tensor are probed,
    sampled with ``rng`` (an :class:`RngStream`); otherwise every coordinate is.
    """
    try:
        loss = f()
    except NumericalError as exc:
        raise ProbeError(f"loss is non-finite at the probe point: {exc}") from exc
    if not np.isfinite(loss.data).all():
        raise ProbeError("loss is non-finite at the probe point")
    loss.backward()
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data)) for k, p in params.items()}

    per_param, checked = {}, 0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = np.sort(rng.generator.choice(flat.size, size=max_entries, replace=False))
        worst = 0.0
        for i in idx:
            orig = flat[i]
            flat[i] = orig + step
            up = _probe(f)
            flat[i] = orig - step
            down = _probe(f)
            flat[i] = orig
            numeric = (up - down) / (2 * step)
            worst = max(worst, float(relative_error(analytic[name].reshape(-1)[i], numeric, floor)))
            checked += 1
        per_param[name] = worst
    top = max(per_param.values(), default=0.0)
    return GradCheckReport(max_rel_error=top, tolerance=tolerance, checked=checked, per_param=per_param)


def _probe(f):
    try:
        val = float(np.asarray(f().data).reshape(-1)[0])
    except NumericalError as exc:
        raise ProbeError(f"loss is non-finite at a perturbed probe point: {exc}") from exc
    if not np.isfinite(val):
        raise ProbeError("loss is non-finite at a perturbed probe point")
    return val
