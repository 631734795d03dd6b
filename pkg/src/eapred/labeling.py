"""Announcement-day price resolution and the three-class direction target."""

from __future__ import annotations

import bisect
import csv
import datetime as dt
from dataclasses import dataclass

import numpy as np

from eapred.errors import DomainError, InputError, UnresolvableEventError

UP, DOWN, NEUTRAL = 0, 1, 2
CLASS_NAMES = ("UP", "DOWN", "NEUTRAL")
DEFAULT_TAU = 0.03
MAX_ROLL_DAYS = 7


@dataclass(frozen=True)
class LabeledEvent:
    firm_id: str
    announcement_date: dt.date
    p_prev: float
    p_ea: float
    r: float
    label: int
    tau: float = DEFAULT_TAU
    ea_date: dt.date | None = None
    prev_date: dt.date | None = None


@dataclass(frozen=True)
class ClassDistribution:
    counts: tuple
    fractions: tuple

    @property
    def total(self):
        return sum(self.counts)


def resolve_ea_price_day(event, trading_dates):
    """Return ``(prev_date, ea_date)`` for an event given sorted bar dates.

    After-close announcements price on the next trading day; pre-close ones on
    the announcement date itself, rolling forward when that date has no bar.
    """
    dates = trading_dates
    ann = event.announcement_date
    if event.after_market_close:
        i = bisect.bisect_right(dates, ann)
    else:
        i = bisect.bisect_left(dates, ann)
    if i >= len(dates) or (dates[i] - ann).days > MAX_ROLL_DAYS:
        raise UnresolvableEventError(f"no trading day within {MAX_ROLL_DAYS} days after {ann.isoformat()}")
    if i == 0:
        raise UnresolvableEventError(f"no trading day before the price day of {ann.isoformat()}")
    return dates[i - 1], dates[i]


def compute_return(p_prev, p_ea):
    if not p_prev > 0:
        raise DomainError(f"previous price must be positive, got {p_prev}")
    return (p_ea - p_prev) / p_prev


def label(p_prev, p_ea, tau=DEFAULT_TAU):
    """Return ``(r, class)`` with inclusive thresholds at +/- tau."""
    r = compute_return(p_prev, p_ea)
    if r >= tau:
        return r, UP
    if r <= -tau:
        return r, DOWN
    return r, NEUTRAL


def label_returns(r, tau=DEFAULT_TAU):
    """Vectorised class assignment for an array of returns."""
    r = np.asarray(r, dtype=np.float64)
    out = np.full(r.shape, NEUTRAL, dtype=np.int64)
    out[r <= -tau] = DOWN
    out[r >= tau] = UP
    return out


def label_event(firm, event, tau=DEFAULT_TAU, trading_dates=None):
    dates = trading_dates if trading_dates is not None else [b.date for b in firm.bars]
    prev_day, ea_day = resolve_ea_price_day(event, dates)
    prices = firm.bar_map()
    p_prev, p_ea = prices[prev_day], prices[ea_day]
    r, y = label(p_prev, p_ea, tau)
    return LabeledEvent(firm.firm_id, event.announcement_date, p_prev, p_ea, r, y, tau, ea_day, prev_day)


def label_dataset(datasets, tau=DEFAULT_TAU):
    """Label every resolvable event; returns ``(labeled, skipped)`` where skipped holds (firm, date, reason)."""
    labeled, skipped = [], []
    for firm_id in sorted(datasets):
        firm = datasets[firm_id]
        dates = [b.date for b in firm.bars]
        for ev in firm.events:
            try:
                labeled.append(label_event(firm, ev, tau, dates))
            except UnresolvableEventError as exc:
                skipped.append((firm_id, ev.announcement_date, str(exc)))
    return labeled, skipped


def distribution(labels):
    labels = [e.label if isinstance(e, LabeledEvent) else int(e) for e in labels]
    if not labels:
        raise InputError("class distribution of an empty event set")
    counts = tuple(int(c) for c in np.bincount(labels, minlength=3)[:3])
    n = len(labels)
    return ClassDistribution(counts, tuple(c / n for c in counts))


LABEL_COLUMNS = ("firm_id", "announcement_date", "p_prev", "p_ea", "r", "label", "tau")


def write_labels(path, events):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABEL_COLUMNS)
        for e in events:
            w.writerow([e.firm_id, e.announcement_date.isoformat(), repr(e.p_prev), repr(e.p_ea), repr(e.r), e.label, repr(e.tau)])


def read_labels(path):
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                LabeledEvent(
                    row["firm_id"],
                    dt.date.fromisoformat(row["announcement_date"]),
                    float(row["p_prev"]),
                    float(row["p_ea"]),
                    float(row["r"]),
                    int(row["label"]),
                    float(row["tau"]),
                )
            )
    return out
