"""Synthetic firm universe for desk-scale experiments.

Prices follow a geometric random walk on a weekday calendar.  Each firm
announces roughly quarterly; the announcement-day return is drawn separately
so that the share of |R| < tau hits ``neutral_share``.  Before each
announcement a burst of news is emitted whose tone matches the (already drawn)
outcome with probability ``sentiment_fidelity`` and is uniform otherwise, so
sentiment is the only feature block that carries label information.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import asdict, dataclass, field
from statistics import NormalDist
from zoneinfo import ZoneInfo

import numpy as np

from eapred.data.io import merge_articles
from eapred.data.types import FUNDAMENTAL_METRICS, EarningsEvent, FirmDataset, FundamentalRecord, NewsArticle, PriceBar
from eapred.errors import ConfigError
from eapred.labeling import DOWN, NEUTRAL, UP, resolve_ea_price_day
from eapred.numerics import RngStream
from eapred.sentiment.lexicon import NEGATIVE_WORDS, NEUTRAL_WORDS, POSITIVE_WORDS

EXCHANGE_TZ = ZoneInfo("America/New_York")
UTC = dt.timezone.utc

# (typical level, relative dispersion across firms)
_METRIC_SCALE = {
    "net_margin": (0.10, 0.5),
    "roe": (0.15, 0.5),
    "roa": (0.06, 0.5),
    "debt_to_equity": (1.2, 0.6),
    "current_ratio": (1.5, 0.4),
    "operating_cash_flow": (2.0e9, 1.0),
    "gross_margin": (0.40, 0.3),
    "operating_margin": (0.15, 0.5),
    "asset_turnover": (0.8, 0.4),
    "interest_coverage": (8.0, 0.7),
    "revenue_growth": (0.05, 1.0),
    "eps": (4.0, 0.8),
    "book_value_per_share": (30.0, 0.7),
    "total_assets": (5.0e10, 1.0),
    "free_cash_flow": (1.5e9, 1.0),
}
_FILLER = ("company", "quarter", "shares", "market", "sector", "analysts", "investors", "today")
_TONE_WORDS = {UP: POSITIVE_WORDS, DOWN: NEGATIVE_WORDS, NEUTRAL: NEUTRAL_WORDS}


@dataclass
class SyntheticSpec:
    n_firms: int = 500
    months: int = 10
    start: dt.date = dt.date(2023, 1, 2)
    seed: int = 0
    daily_vol: float = 0.015
    tau: float = 0.03
    neutral_share: float = 0.67
    after_close_prob: float = 0.5
    fundamentals_missing: float = 0.1
    sentiment_fidelity: float = 0.6
    signal_articles: float = 4.0
    signal_horizon_days: int = 14
    background_rate: float = 0.1
    news_batches: int = 3
    batch_overlap_days: int = 10
    holidays: tuple = ("01-01", "07-04", "12-25")
    first_event_offset: tuple = (40, 100)
    event_spacing: int = 91

    def validate(self):
        if self.n_firms < 1:
            raise ConfigError("n_firms must be at least 1")
        if self.months < 2:
            raise ConfigError("months must be at least 2")
        if not 0.0 <= self.sentiment_fidelity <= 1.0:
            raise ConfigError(f"sentiment_fidelity must lie in [0, 1], got {self.sentiment_fidelity}")
        if not 0.0 < self.neutral_share < 1.0:
            raise ConfigError("neutral_share must lie in (0, 1)")
        for name in ("after_close_prob", "fundamentals_missing"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.daily_vol < 0 or self.tau <= 0:
            raise ConfigError("daily_vol must be >= 0 and tau > 0")
        if self.news_batches < 1 or self.batch_overlap_days < 0:
            raise ConfigError("news_batches >= 1 and batch_overlap_days >= 0 required")

    @property
    def announcement_vol(self):
        """Std of the announcement-day simple return implied by ``neutral_share``."""
        z = NormalDist().inv_cdf(0.5 + self.neutral_share / 2.0)
        return self.tau / z

    @property
    def end(self):
        y, m = divmod(self.start.month - 1 + self.months, 12)
        return dt.date(self.start.year + y, m + 1, min(self.start.day, 28)) - dt.timedelta(days=1)

    def to_dict(self):
        d = asdict(self)
        d["start"] = self.start.isoformat()
        d["holidays"] = list(self.holidays)
        d["first_event_offset"] = list(self.first_event_offset)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if isinstance(d.get("start"), str):
            d["start"] = dt.date.fromisoformat(d["start"])
        for k in ("holidays", "first_event_offset"):
            if k in d:
                d[k] = tuple(d[k])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown synthetic spec keys: {sorted(unknown)}")
        return cls(**d)


def trading_calendar(start, end, holidays=()):
    days = []
    d = start
    while d <= end:
        if d.weekday() < 5 and d.strftime("%m-%d") not in holidays:
            days.append(d)
        d += dt.timedelta(days=1)
    return days


def draw_announcement_returns(rng, n, spec):
    r = rng.normal(n, scale=spec.announcement_vol)
    return np.clip(r, -0.9, None)


def _outcome(r, tau):
    if r >= tau:
        return UP
    if r <= -tau:
        return DOWN
    return NEUTRAL


def _article_text(rng, tone, firm_id):
    words = _TONE_WORDS[tone]
    k = int(rng.integers(2, 6))
    picks = [words[i] for i in rng.integers(0, len(words), shape=k)]
    fill = [_FILLER[i] for i in rng.integers(0, len(_FILLER), shape=2)]
    body_words = picks + fill
    order = rng.permutation(len(body_words))
    headline = f"{firm_id} {picks[0]} {fill[0]}"
    body = " ".join(body_words[i] for i in order)
    return headline, body


def _stamp(day, minutes):
    local = dt.datetime.combine(day, dt.time(0, 0), tzinfo=EXCHANGE_TZ) + dt.timedelta(minutes=int(minutes))
    return local.astimezone(UTC)


def _generate_firm(idx, spec, calendar, rng):
    firm_id = f"F{idx:04d}"
    start, end = calendar[0], calendar[-1]

    # announcements
    events = []
    offset = int(rng.integers(spec.first_event_offset[0], spec.first_event_offset[1]))
    ann = start + dt.timedelta(days=offset)
    last_allowed = end - dt.timedelta(days=10)
    while ann <= last_allowed:
        while ann.weekday() >= 5:
            ann += dt.timedelta(days=1)
        amc = bool(rng.uniform() < spec.after_close_prob)
        events.append(EarningsEvent(ann, amc))
        ann += dt.timedelta(days=spec.event_spacing + int(rng.integers(-5, 6)))
    events = [e for e in events if e.announcement_date <= last_allowed]

    # prices
    n = len(calendar)
    rets = np.expm1(rng.normal(n, scale=spec.daily_vol))
    rets[0] = 0.0
    ea_returns = draw_announcement_returns(rng, len(events), spec)
    position = {d: i for i, d in enumerate(calendar)}
    outcomes = []
    ea_days = []
    for ev, r in zip(events, ea_returns):
        _, ea_day = resolve_ea_price_day(ev, calendar)
        rets[position[ea_day]] = r
        outcomes.append(_outcome(float(r), spec.tau))
        ea_days.append(ea_day)
    p0 = float(rng.uniform(low=20.0, high=200.0))
    closes = p0 * np.cumprod(1.0 + rets)
    bars = [PriceBar(d, float(c)) for d, c in zip(calendar, closes)]

    # fundamentals: one record at the start and one the day after each announcement
    base = {m: lvl * float(np.exp(rng.normal(scale=disp))) for m, (lvl, disp) in _METRIC_SCALE.items()}
    record_days = [start] + [e.announcement_date + dt.timedelta(days=1) for e in events]
    fundamentals = []
    for day in record_days:
        noise = rng.normal(len(FUNDAMENTAL_METRICS), scale=0.05)
        missing = rng.uniform(shape=len(FUNDAMENTAL_METRICS)) < spec.fundamentals_missing
        values = {
            m: base[m] * (1.0 + float(eps)) for m, eps, gone in zip(FUNDAMENTAL_METRICS, noise, missing) if not gone
        }
        fundamentals.append(FundamentalRecord(day, values))

    # news: signal bursts before each announcement plus tone-free background flow
    raw = []
    for ev, ea_day, outcome in zip(events, ea_days, outcomes):
        k = 1 + int(rng.generator.poisson(max(spec.signal_articles - 1.0, 0.0)))
        for _ in range(k):
            back = int(rng.integers(1, spec.signal_horizon_days + 1))
            day = ea_day - dt.timedelta(days=back)
            tone = outcome if rng.uniform() < spec.sentiment_fidelity else int(rng.integers(0, 3))
            headline, body = _article_text(rng, tone, firm_id)
            # 09:00-15:30 local, before the close so it lands on `day`
            raw.append(NewsArticle(_stamp(day, rng.integers(540, 930)), headline, body, firm_id))
    total_days = (end - start).days + 1
    counts = rng.generator.poisson(spec.background_rate, size=total_days)
    for offset in np.nonzero(counts)[0]:
        day = start + dt.timedelta(days=int(offset))
        for _ in range(int(counts[offset])):
            headline, body = _article_text(rng, int(rng.integers(0, 3)), firm_id)
            raw.append(NewsArticle(_stamp(day, rng.integers(0, 1440)), headline, body, firm_id))

    articles = merge_articles(_batched(raw, spec, start, end))
    return FirmDataset(firm_id, bars=bars, fundamentals=fundamentals, articles=articles, events=events)


def _batched(articles, spec, start, end):
    """Emulate overlapping download batches; overlap produces duplicates that the merge removes."""
    if spec.news_batches == 1:
        return list(articles)
    width = ((end - start).days + 1) / spec.news_batches
    offsets = [(a.timestamp.astimezone(EXCHANGE_TZ).date() - start).days for a in articles]
    out = []
    for b in range(spec.news_batches):
        lo = int(b * width) - (spec.batch_overlap_days if b else 10**9)
        hi = int((b + 1) * width) if b < spec.news_batches - 1 else 10**9
        out.extend(a for a, off in zip(articles, offsets) if lo <= off < hi)
    return out


def generate_synthetic(spec=None, **overrides):
    """Generate ``{firm_id: FirmDataset}``; fully determined by ``spec.seed``."""
    spec = spec or SyntheticSpec()
    if overrides:
        spec = SyntheticSpec(**{**asdict(spec), **overrides})
    spec.validate()
    calendar = trading_calendar(spec.start, spec.end, spec.holidays)
    root = RngStream(spec.seed).substream("datagen")
    out = {}
    for i in range(spec.n_firms):
        firm = _generate_firm(i, spec, calendar, root.substream("firm", i))
        out[firm.firm_id] = firm
    return out
