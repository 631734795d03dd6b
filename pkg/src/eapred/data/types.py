from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

SCHEMA_VERSION = "eapred/1"

FUNDAMENTAL_METRICS = (
    "net_margin",
    "roe",
    "roa",
    "debt_to_equity",
    "current_ratio",
    "operating_cash_flow",
    "gross_margin",
    "operating_margin",
    "asset_turnover",
    "interest_coverage",
    "revenue_growth",
    "eps",
    "book_value_per_share",
    "total_assets",
    "free_cash_flow",
)


@dataclass(frozen=True)
class PriceBar:
    date: dt.date
    adjusted_close: float


@dataclass(frozen=True)
class FundamentalRecord:
    """One dated snapshot of firm fundamentals; absent keys are missing values."""

    effective_date: dt.date
    values: dict = field(default_factory=dict)


@dataclass(frozen=True)
class NewsArticle:
    timestamp: dt.datetime
    headline: str
    body: str
    firm_id: str

    @property
    def key(self):
        return (self.timestamp, self.headline)


@dataclass(frozen=True)
class EarningsEvent:
    announcement_date: dt.date
    after_market_close: bool


@dataclass
class FirmDataset:
    firm_id: str
    bars: list = field(default_factory=list)
    fundamentals: list = field(default_factory=list)
    articles: list = field(default_factory=list)
    events: list = field(default_factory=list)

    @property
    def has_events(self):
        return bool(self.events)

    @property
    def first_date(self):
        return self.bars[0].date

    @property
    def last_date(self):
        return self.bars[-1].date

    def bar_map(self):
        return {b.date: b.adjusted_close for b in self.bars}


@dataclass(frozen=True, order=True)
class EventRef:
    """Global handle for one announcement; sorts by date, then firm id."""

    announcement_date: dt.date
    firm_id: str
