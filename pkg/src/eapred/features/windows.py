"""Per-firm daily frames and fixed-length pre-announcement windows.

Feature order (d = 21):
    15 fundamentals in schema order, adjusted_close, sma_3, sma_6,
    sent_pos, sent_neg, sent_neu.
The ablated layout (d = 18) drops the last three columns.
"""

from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field

import numpy as np

from eapred.data.split import split_events
from eapred.data.types import FUNDAMENTAL_METRICS, EventRef
from eapred.errors import InputError, LeadingGapError, UnresolvableEventError
from eapred.features.preprocess import apply_scaler, fit_imputer, fit_scaler, forward_fill, mean_impute, sma
from eapred.labeling import DEFAULT_TAU, distribution, label_event
from eapred.sentiment import NO_NEWS, daily_sentiment
from eapred.store import read_arrays, write_arrays

log = logging.getLogger(__name__)

WINDOW_DAYS = 30
MARKET_FEATURES = ("adjusted_close", "sma_3", "sma_6")
SENTIMENT_FEATURES = ("sent_pos", "sent_neg", "sent_neu")
FEATURE_NAMES = FUNDAMENTAL_METRICS + MARKET_FEATURES + SENTIMENT_FEATURES
ABLATED_FEATURE_NAMES = FUNDAMENTAL_METRICS + MARKET_FEATURES
N_FUND = len(FUNDAMENTAL_METRICS)
STORE_FORMAT = "eapred-windows/1"


def feature_names(with_sentiment=True):
    return FEATURE_NAMES if with_sentiment else ABLATED_FEATURE_NAMES


@dataclass
class FirmFrame:
    """Dense calendar-day feature grid for one firm, before imputation and scaling."""

    firm_id: str
    start: dt.date
    values: np.ndarray  # (days, 21); NaN marks missing fundamentals
    trading_dates: list

    def index(self, day):
        return (day - self.start).days

    def rows_before(self, day, length=WINDOW_DAYS):
        end = self.index(day)
        if end - length < 0:
            raise LeadingGapError(
                f"{self.firm_id}: need {length} days before {day.isoformat()}, data starts {self.start.isoformat()}"
            )
        return self.values[end - length : end]


def build_frame(firm, provider):
    if not firm.bars:
        raise InputError(f"{firm.firm_id}: no price bars")
    dates = [b.date for b in firm.bars]
    closes = np.array([b.adjusted_close for b in firm.bars])
    market = np.column_stack([closes, sma(closes, 3), sma(closes, 6)])
    filled = forward_fill({d: row for d, row in zip(dates, market)})
    days = sorted(filled)
    n = len(days)
    ordinals = np.array([d.toordinal() for d in days])

    fund = np.full((n, N_FUND), np.nan)
    for j, metric in enumerate(FUNDAMENTAL_METRICS):
        obs = [(r.effective_date.toordinal(), r.values[metric]) for r in firm.fundamentals if metric in r.values]
        if not obs:
            continue
        obs_days = np.array([o[0] for o in obs])
        obs_vals = np.array([o[1] for o in obs])
        pos = np.searchsorted(obs_days, ordinals, side="right") - 1
        fund[:, j] = np.where(pos >= 0, obs_vals[np.clip(pos, 0, None)], np.nan)

    sent = np.tile(NO_NEWS.as_tuple(), (n, 1))
    for day, vec in daily_sentiment(firm.articles, provider).items():
        i = (day - days[0]).days
        if 0 <= i < n:
            sent[i] = vec.as_tuple()

    values = np.hstack([fund, np.vstack([filled[d] for d in days]), sent])
    return FirmFrame(firm.firm_id, days[0], values, dates)


@dataclass
class FeatureWindow:
    firm_id: str
    announcement_date: dt.date
    matrix: np.ndarray
    feature_names: tuple
    label: int | None = None


def finish_window(raw, imputer_means, scaler, with_sentiment=True):
    """Impute, standardize and (optionally) drop the sentiment block of a raw window."""
    dense = raw.copy()
    dense[..., :N_FUND] = mean_impute(raw[..., :N_FUND], imputer_means)
    scaled = apply_scaler(dense, scaler)
    return scaled if with_sentiment else scaled[..., : len(ABLATED_FEATURE_NAMES)]


def build_window(firm, event, scaler, imputer_means, provider, with_sentiment=True, tau=DEFAULT_TAU, frame=None):
    frame = frame or build_frame(firm, provider)
    labeled = label_event(firm, event, tau, frame.trading_dates)
    raw = frame.rows_before(labeled.ea_date)
    mat = finish_window(raw, imputer_means, scaler, with_sentiment)
    return FeatureWindow(firm.firm_id, event.announcement_date, mat, feature_names(with_sentiment), labeled.label)


# ---------------------------------------------------------------- full preparation


@dataclass
class SplitData:
    X: np.ndarray  # (n, T, 21) standardized
    y: np.ndarray
    r: np.ndarray
    refs: list

    def features(self, with_sentiment=True):
        return self.X if with_sentiment else self.X[..., : len(ABLATED_FEATURE_NAMES)]


@dataclass
class Prepared:
    splits: dict
    scaler: object
    imputer_means: np.ndarray
    labeled: list
    tau: float
    skipped: list = field(default_factory=list)

    def distribution(self, split="train"):
        return distribution(self.splits[split].y.tolist())


def prepare(datasets, provider, tau=DEFAULT_TAU, fractions=(0.7, 0.15, 0.15)):
    """Label, window, split, impute and scale; statistics come from the train split only."""
    raws, labeled, skipped = {}, {}, []
    for firm_id in sorted(datasets):
        firm = datasets[firm_id]
        if not firm.events:
            continue
        frame = build_frame(firm, provider)
        for ev in firm.events:
            ref = EventRef(ev.announcement_date, firm_id)
            try:
                le = label_event(firm, ev, tau, frame.trading_dates)
                raws[ref] = frame.rows_before(le.ea_date)
            except UnresolvableEventError as exc:
                skipped.append((firm_id, ev.announcement_date.isoformat(), "unresolvable", str(exc)))
                continue
            except LeadingGapError as exc:
                skipped.append((firm_id, ev.announcement_date.isoformat(), "insufficient_history", str(exc)))
                continue
            labeled[ref] = le
    if skipped:
        log.info("skipped %d events without a usable window", len(skipped))

    parts = split_events(list(raws), fractions)
    names = ("train", "val", "test")
    train_raw = np.stack([raws[r] for r in parts[0]])
    means = fit_imputer(train_raw[..., :N_FUND], FUNDAMENTAL_METRICS)
    dense_train = train_raw.copy()
    dense_train[..., :N_FUND] = mean_impute(train_raw[..., :N_FUND], means)
    scaler = fit_scaler(dense_train, FEATURE_NAMES)

    splits = {}
    for name, refs in zip(names, parts):
        if refs:
            X = finish_window(np.stack([raws[r] for r in refs]), means, scaler)
        else:
            X = np.zeros((0, WINDOW_DAYS, len(FEATURE_NAMES)))
        y = np.array([labeled[r].label for r in refs], dtype=np.int64)
        rr = np.array([labeled[r].r for r in refs], dtype=np.float64)
        splits[name] = SplitData(X, y, rr, list(refs))
    ordered = [labeled[r] for r in sorted(labeled)]
    return Prepared(splits, scaler, means, ordered, tau, skipped)


# ---------------------------------------------------------------- window store


def write_window_store(path, split_name, data, with_sentiment, scaler, imputer_means, tau):
    names = feature_names(with_sentiment)
    meta = {
        "split": split_name,
        "with_sentiment": bool(with_sentiment),
        "d": len(names),
        "T": WINDOW_DAYS,
        "feature_names": list(names),
        "scaler": scaler.subset(names).to_dict(),
        "imputer_means": [float(v) for v in imputer_means],
        "tau": tau,
        "refs": [[r.firm_id, r.announcement_date.isoformat()] for r in data.refs],
    }
    write_arrays(path, {"X": data.features(with_sentiment), "y": data.y, "r": data.r}, meta, STORE_FORMAT)


def read_window_store(path):
    arrays, meta = read_arrays(path, STORE_FORMAT)
    refs = [EventRef(dt.date.fromisoformat(d), f) for f, d in meta["refs"]]
    return SplitData(arrays["X"], arrays["y"], arrays["r"], refs), meta
