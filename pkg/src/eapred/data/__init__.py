"""Firm-level dataset types, file ingestion, synthetic generation and splitting."""

from eapred.data.io import IngestConfig, IngestReport, ingest, load_dataset, merge_articles, write_dataset
from eapred.data.split import split_events
from eapred.data.synthetic import SyntheticSpec, generate_synthetic
from eapred.data.types import (
    FUNDAMENTAL_METRICS,
    SCHEMA_VERSION,
    EarningsEvent,
    EventRef,
    FirmDataset,
    FundamentalRecord,
    NewsArticle,
    PriceBar,
)

__all__ = [
    "FUNDAMENTAL_METRICS",
    "SCHEMA_VERSION",
    "EarningsEvent",
    "EventRef",
    "FirmDataset",
    "FundamentalRecord",
    "IngestConfig",
    "IngestReport",
    "NewsArticle",
    "PriceBar",
    "SyntheticSpec",
    "generate_synthetic",
    "ingest",
    "load_dataset",
    "merge_articles",
    "split_events",
    "write_dataset",
]
