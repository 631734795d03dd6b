"""Temporal fill, mean imputation, moving averages and z-score scaling."""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field

import numpy as np

from eapred.errors import ConfigError, InputError, LeadingGapError

log = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-8


def forward_fill(observations, start=None, end=None, leading=None):
    """Expand ``{date: value}`` to every calendar day in ``[start, end]``.

    Each day carries the latest observation on or before it.  Days before the
    first observation raise :class:`LeadingGapError` unless ``leading`` is
    given, in which case they take that value.
    """
    if not observations:
        raise LeadingGapError("cannot forward-fill an empty series")
    days = sorted(observations)
    start = start or days[0]
    end = end or days[-1]
    if start < days[0] and leading is None:
        raise LeadingGapError(f"fill requested from {start.isoformat()} before first observation {days[0].isoformat()}")
    out = {}
    i, current = 0, leading
    d = start
    while d <= end:
        while i < len(days) and days[i] <= d:
            current = observations[days[i]]
            i += 1
        out[d] = current
        d += dt.timedelta(days=1)
    return out


def sma(prices, k):
    """Trailing mean over the last ``min(k, t+1)`` values."""
    x = np.asarray(prices, dtype=np.float64)
    if x.size == 0:
        raise InputError("sma of an empty series")
    c = np.cumsum(np.concatenate([[0.0], x]))
    t = np.arange(1, x.size + 1)
    lo = np.maximum(t - k, 0)
    return (c[t] - c[lo]) / (t - lo)


def fit_imputer(matrix, names):
    """Column means over non-missing cells; every column must have at least one value."""
    m = np.asarray(matrix, dtype=np.float64).reshape(-1, len(names))
    present = ~np.isnan(m)
    empty = [n for n, ok in zip(names, present.any(axis=0)) if not ok]
    if empty:
        raise ConfigError(f"metrics missing everywhere in the training split: {', '.join(empty)}")
    return np.where(present, m, 0.0).sum(axis=0) / present.sum(axis=0)


def mean_impute(matrix, means):
    m = np.array(matrix, dtype=np.float64, copy=True)
    means = np.asarray(means, dtype=np.float64)
    holes = np.isnan(m)
    if holes.any():
        m[holes] = np.broadcast_to(means, m.shape)[holes]
    return m


@dataclass
class ScalerState:
    mean: np.ndarray
    std: np.ndarray
    feature_names: tuple
    clamped: tuple = field(default_factory=tuple)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        self.feature_names = tuple(self.feature_names)
        if not (len(self.mean) == len(self.std) == len(self.feature_names)):
            raise ConfigError("scaler mean/std/names length mismatch")

    def subset(self, names):
        idx = [self.feature_names.index(n) for n in names]
        return ScalerState(self.mean[idx], self.std[idx], names, tuple(c for c in self.clamped if c in names))

    def to_dict(self):
        return {
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "feature_names": list(self.feature_names),
            "clamped": list(self.clamped),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["mean"], d["std"], d["feature_names"], tuple(d.get("clamped", ())))


def fit_scaler(windows, feature_names):
    """Fit per-feature mean and population std over every row of the training windows."""
    rows = np.asarray(windows, dtype=np.float64).reshape(-1, len(feature_names))
    if rows.shape[0] < 2:
        raise InputError("need at least two training rows to fit the scaler")
    mu = rows.mean(axis=0)
    constant = np.ptp(rows, axis=0) == 0
    mu[constant] = rows[0, constant]
    sigma = rows.std(axis=0)
    sigma[constant] = 0.0
    clamped = tuple(n for n, s in zip(feature_names, sigma) if s < SIGMA_FLOOR)
    if clamped:
        log.warning("zero-variance features clamped to sigma=%g: %s", SIGMA_FLOOR, ", ".join(clamped))
    sigma = np.maximum(sigma, SIGMA_FLOOR)
    return ScalerState(mu, sigma, feature_names, clamped)


def apply_scaler(window, state):
    return (np.asarray(window, dtype=np.float64) - state.mean) / state.std
