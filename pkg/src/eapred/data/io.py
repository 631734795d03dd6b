"""File-based ingestion of the four input tables and their serialization.

Every file opens with a schema line: ``#schema=eapred/1`` for the CSV tables
and ``{"schema": "eapred/1"}`` for ``news.jsonl``.  After that:

* ``prices.csv``        firm_id,date,adjusted_close
* ``fundamentals.csv``  firm_id,effective_date,metric,value   (empty value = missing)
* ``news.jsonl``        one object per line with firm_id,timestamp,headline,body
* ``events.csv``        firm_id,announcement_date,after_market_close

Line numbers in error messages are 1-based physical lines of the file.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from eapred.data.types import (
    FUNDAMENTAL_METRICS,
    SCHEMA_VERSION,
    EarningsEvent,
    FirmDataset,
    FundamentalRecord,
    NewsArticle,
    PriceBar,
)
from eapred.errors import InputError, MalformedRowError, ValidationError

log = logging.getLogger(__name__)

FILES = {
    "prices": "prices.csv",
    "fundamentals": "fundamentals.csv",
    "news": "news.jsonl",
    "events": "events.csv",
}
COLUMNS = {
    "prices": ("firm_id", "date", "adjusted_close"),
    "fundamentals": ("firm_id", "effective_date", "metric", "value"),
    "news": ("firm_id", "timestamp", "headline", "body"),
    "events": ("firm_id", "announcement_date", "after_market_close"),
}
MANIFEST = "manifest.json"


@dataclass
class IngestConfig:
    prices: Path
    events: Path
    fundamentals: Path | None = None
    news: Path | None = None
    schema_version: str = SCHEMA_VERSION

    @classmethod
    def from_directory(cls, directory):
        d = Path(directory)
        return cls(
            prices=d / FILES["prices"],
            events=d / FILES["events"],
            fundamentals=d / FILES["fundamentals"],
            news=d / FILES["news"],
        )


@dataclass
class IngestReport:
    row_counts: dict = field(default_factory=dict)
    duplicate_articles: int = 0
    orphan_rows: dict = field(default_factory=dict)
    firms_without_events: list = field(default_factory=list)


# ---------------------------------------------------------------- parsing helpers


def _parse_date(text, path, line, column):
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise MalformedRowError(path, line, column, f"not an ISO date: {text!r}") from None


def _parse_float(text, path, line, column, allow_empty=False):
    text = text.strip()
    if allow_empty and text == "":
        return None
    try:
        val = float(text)
    except ValueError:
        raise MalformedRowError(path, line, column, f"not a number: {text!r}") from None
    if not math.isfinite(val):
        raise MalformedRowError(path, line, column, f"non-finite number: {text!r}")
    return val


def _parse_bool(text, path, line, column):
    t = text.strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise MalformedRowError(path, line, column, f"not a boolean: {text!r}")


def _parse_timestamp(text, path, line, column):
    try:
        ts = dt.datetime.fromisoformat(str(text).strip().replace("Z", "+00:00"))
    except ValueError:
        raise MalformedRowError(path, line, column, f"not an ISO timestamp: {text!r}") from None
    if ts.tzinfo is None:
        raise MalformedRowError(path, line, column, "timestamp lacks a UTC offset")
    return ts


def _check_exists(path):
    if path is None or not Path(path).is_file():
        raise InputError(f"input file not found: {path}")


def _read_csv(path, kind, expected_version):
    _check_exists(path)
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\r\n")
        if not first.startswith("#schema="):
            raise MalformedRowError(path, 1, "schema", "missing '#schema=' line")
        version = first[len("#schema=") :]
        if version != expected_version:
            raise MalformedRowError(path, 1, "schema", f"schema {version!r} != expected {expected_version!r}")
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRowError(path, 2, "header", "missing header row") from None
        want = COLUMNS[kind]
        if tuple(h.strip() for h in header) != want:
            raise MalformedRowError(path, 2, "header", f"expected columns {','.join(want)}, got {','.join(header)}")
        rows = []
        for row in reader:
            line = reader.line_num + 1
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(want):
                col = want[min(len(row), len(want) - 1)]
                raise MalformedRowError(path, line, col, f"expected {len(want)} fields, got {len(row)}")
            rows.append((line, dict(zip(want, row))))
    return rows


def _read_jsonl(path, expected_version):
    _check_exists(path)
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if line_no == 1:
                try:
                    head = json.loads(raw)
                except json.JSONDecodeError:
                    head = None
                if not isinstance(head, dict) or head.get("schema") != expected_version:
                    raise MalformedRowError(path, 1, "schema", f"expected schema header {expected_version!r}")
                continue
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise MalformedRowError(path, line_no, "record", f"invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise MalformedRowError(path, line_no, "record", "expected a JSON object")
            for col in COLUMNS["news"]:
                if col not in obj:
                    raise MalformedRowError(path, line_no, col, "missing field")
                if not isinstance(obj[col], str):
                    raise MalformedRowError(path, line_no, col, "expected a string")
            rows.append((line_no, obj))
    return rows


# ---------------------------------------------------------------- merge semantics


def merge_articles(articles):
    """Drop exact (timestamp, headline) duplicates and sort chronologically."""
    unique = {}
    for a in articles:
        unique.setdefault(a.key, a)
    return sorted(unique.values(), key=lambda a: (a.timestamp, a.headline))


def ingest(config, report=None):
    """Read, validate and merge the input tables into ``{firm_id: FirmDataset}``."""
    report = report if report is not None else IngestReport()
    version = config.schema_version

    price_rows = _read_csv(config.prices, "prices", version)
    bars = defaultdict(dict)
    for line, row in price_rows:
        firm = row["firm_id"].strip()
        if not firm:
            raise MalformedRowError(config.prices, line, "firm_id", "empty firm id")
        day = _parse_date(row["date"], config.prices, line, "date")
        close = _parse_float(row["adjusted_close"], config.prices, line, "adjusted_close")
        if close <= 0:
            raise MalformedRowError(config.prices, line, "adjusted_close", f"price must be positive, got {close}")
        if day in bars[firm]:
            raise ValidationError(f"{config.prices}:{line}: duplicate price bar for ({firm}, {day.isoformat()})")
        bars[firm][day] = close
    report.row_counts["prices"] = len(price_rows)

    datasets = {
        firm: FirmDataset(firm, bars=[PriceBar(d, bars[firm][d]) for d in sorted(bars[firm])]) for firm in sorted(bars)
    }
    orphans = defaultdict(int)

    fundamentals = defaultdict(lambda: defaultdict(dict))
    if config.fundamentals is not None and Path(config.fundamentals).exists():
        rows = _read_csv(config.fundamentals, "fundamentals", version)
        for line, row in rows:
            firm = row["firm_id"].strip()
            day = _parse_date(row["effective_date"], config.fundamentals, line, "effective_date")
            metric = row["metric"].strip()
            if metric not in FUNDAMENTAL_METRICS:
                raise MalformedRowError(config.fundamentals, line, "metric", f"unknown metric {metric!r}")
            value = _parse_float(row["value"], config.fundamentals, line, "value", allow_empty=True)
            if firm not in datasets:
                orphans["fundamentals"] += 1
                continue
            record = fundamentals[firm][day]
            if value is not None:
                record[metric] = value
        report.row_counts["fundamentals"] = len(rows)
    for firm, by_day in fundamentals.items():
        datasets[firm].fundamentals = [FundamentalRecord(d, dict(by_day[d])) for d in sorted(by_day)]

    articles = defaultdict(list)
    if config.news is not None and Path(config.news).exists():
        rows = _read_jsonl(config.news, version)
        for line, obj in rows:
            firm = obj["firm_id"].strip()
            ts = _parse_timestamp(obj["timestamp"], config.news, line, "timestamp")
            if firm not in datasets:
                orphans["news"] += 1
                continue
            articles[firm].append(NewsArticle(ts, obj["headline"], obj["body"], firm))
        report.row_counts["news"] = len(rows)
    for firm, items in articles.items():
        merged = merge_articles(items)
        report.duplicate_articles += len(items) - len(merged)
        datasets[firm].articles = merged

    event_rows = _read_csv(config.events, "events", version)
    seen = set()
    for line, row in event_rows:
        firm = row["firm_id"].strip()
        day = _parse_date(row["announcement_date"], config.events, line, "announcement_date")
        amc = _parse_bool(row["after_market_close"], config.events, line, "after_market_close")
        if firm not in datasets:
            raise ValidationError(f"{config.events}:{line}: event for firm {firm!r} without price bars")
        if (firm, day) in seen:
            raise ValidationError(f"{config.events}:{line}: duplicate event ({firm}, {day.isoformat()})")
        seen.add((firm, day))
        ds = datasets[firm]
        if not ds.first_date <= day <= ds.last_date:
            raise ValidationError(
                f"{config.events}:{line}: event {day.isoformat()} outside bar range "
                f"[{ds.first_date.isoformat()}, {ds.last_date.isoformat()}] for {firm}"
            )
        ds.events.append(EarningsEvent(day, amc))
    report.row_counts["events"] = len(event_rows)
    for ds in datasets.values():
        ds.events.sort(key=lambda e: e.announcement_date)

    report.orphan_rows = dict(orphans)
    report.firms_without_events = [f for f, ds in datasets.items() if not ds.events]
    if report.firms_without_events:
        log.info("%d firms have no earnings events", len(report.firms_without_events))
    return datasets


# ---------------------------------------------------------------- writing


def _fmt_float(x):
    return repr(float(x))


def write_dataset(datasets, directory):
    """Serialize ``datasets`` into the four input tables plus ``manifest.json``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    firms = [datasets[k] for k in sorted(datasets)]
    counts = {}

    with open(out / FILES["prices"], "w", newline="", encoding="utf-8") as fh:
        fh.write(f"#schema={SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS["prices"])
        n = 0
        for ds in firms:
            for b in ds.bars:
                w.writerow([ds.firm_id, b.date.isoformat(), _fmt_float(b.adjusted_close)])
                n += 1
        counts["prices"] = n

    with open(out / FILES["fundamentals"], "w", newline="", encoding="utf-8") as fh:
        fh.write(f"#schema={SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS["fundamentals"])
        n = 0
        for ds in firms:
            for rec in ds.fundamentals:
                for m in FUNDAMENTAL_METRICS:
                    v = rec.values.get(m)
                    w.writerow([ds.firm_id, rec.effective_date.isoformat(), m, "" if v is None else _fmt_float(v)])
                    n += 1
        counts["fundamentals"] = n

    with open(out / FILES["news"], "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"schema": SCHEMA_VERSION}) + "\n")
        n = 0
        for ds in firms:
            for a in ds.articles:
                rec = {"firm_id": a.firm_id, "timestamp": a.timestamp.isoformat(), "headline": a.headline, "body": a.body}
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
                n += 1
        counts["news"] = n

    with open(out / FILES["events"], "w", newline="", encoding="utf-8") as fh:
        fh.write(f"#schema={SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS["events"])
        n = 0
        for ds in firms:
            for e in ds.events:
                w.writerow([ds.firm_id, e.announcement_date.isoformat(), "true" if e.after_market_close else "false"])
                n += 1
        counts["events"] = n

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "row_counts": counts,
        "files": {k: FILES[k] for k in FILES},
        "checksums": {k: file_digest(out / FILES[k]) for k in FILES},
        "firms": len(firms),
    }
    manifest["digest"] = dataset_digest(out)
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def dataset_digest(directory):
    """Content digest over the four tables, independent of the manifest."""
    h = hashlib.sha256()
    for kind in sorted(FILES):
        h.update(kind.encode())
        h.update(file_digest(Path(directory) / FILES[kind]).encode())
    return h.hexdigest()


def load_dataset(directory):
    """Ingest a directory previously produced by :func:`write_dataset`."""
    return ingest(IngestConfig.from_directory(directory))
