"""Assign scored articles to exchange-local days and average them per day."""

from __future__ import annotations

import datetime as dt
from collections import defaultdict
from zoneinfo import ZoneInfo

from eapred.errors import InputError
from eapred.sentiment.providers import SentimentVector

EXCHANGE_TZ = ZoneInfo("America/New_York")
MARKET_CLOSE = dt.time(16, 0)


def assign_day(timestamp, tz=EXCHANGE_TZ, close=MARKET_CLOSE):
    """Exchange-local calendar day an article can first affect; at or after the close rolls to tomorrow."""
    local = timestamp.astimezone(tz)
    day = local.date()
    if local.time() >= close:
        day += dt.timedelta(days=1)
    return day


def aggregate_daily(vectors):
    """Coordinate-wise mean of one firm-day's sentiment vectors."""
    vectors = list(vectors)
    if not vectors:
        raise InputError("no articles for this firm-day; use the no-news fill vector instead")
    n = len(vectors)
    pos = sum(v.p_positive for v in vectors) / n
    neg = sum(v.p_negative for v in vectors) / n
    neu = sum(v.p_neutral for v in vectors) / n
    return SentimentVector(pos, neg, neu)


def daily_sentiment(articles, provider, tz=EXCHANGE_TZ, close=MARKET_CLOSE):
    """Map each exchange-local day with news to its averaged sentiment vector."""
    by_day = defaultdict(list)
    for a in articles:
        by_day[assign_day(a.timestamp, tz, close)].append(provider.score(a))
    return {day: aggregate_daily(vs) for day, vs in sorted(by_day.items())}
