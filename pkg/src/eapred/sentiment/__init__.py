"""Pluggable article sentiment scoring and per-day aggregation."""

from eapred.sentiment.aggregate import aggregate_daily, assign_day, daily_sentiment
from eapred.sentiment.providers import (
    NO_NEWS,
    LexiconProvider,
    PrecomputedProvider,
    RemoteProvider,
    SentimentVector,
    article_key,
    provider_from_config,
)


def score(article, provider):
    return provider.score(article)


__all__ = [
    "NO_NEWS",
    "LexiconProvider",
    "PrecomputedProvider",
    "RemoteProvider",
    "SentimentVector",
    "aggregate_daily",
    "article_key",
    "assign_day",
    "daily_sentiment",
    "provider_from_config",
    "score",
]
