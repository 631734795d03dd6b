"""Article scorers producing three-way (positive, negative, neutral) probabilities."""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import logging
import os
import tempfile
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path

from eapred.errors import ConfigError, InputError, SentimentLookupError, TransportError
from eapred.sentiment.lexicon import lexicon_scores

log = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class SentimentVector:
    p_positive: float
    p_negative: float
    p_neutral: float

    def __post_init__(self):
        vals = self.as_tuple()
        if any(not (0.0 <= v <= 1.0) for v in vals) or abs(sum(vals) - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"not a probability vector: {vals}")

    def as_tuple(self):
        return (self.p_positive, self.p_negative, self.p_neutral)


NO_NEWS = SentimentVector(0.0, 0.0, 1.0)


def article_text(article, granularity="headline+body"):
    if granularity == "headline":
        return article.headline
    if granularity == "body":
        return article.body
    if granularity == "headline+body":
        return f"{article.headline}\n{article.body}" if article.headline else article.body
    raise ConfigError(f"unknown text granularity {granularity!r}")


def headline_digest(headline):
    return hashlib.sha256(headline.encode("utf-8")).hexdigest()


def article_key(article):
    ts = article.timestamp.astimezone(dt.timezone.utc).isoformat()
    return (article.firm_id, ts, headline_digest(article.headline))


class LexiconProvider:
    kind = "lexicon"

    def __init__(self, granularity="headline+body"):
        if granularity not in ("headline", "body", "headline+body"):
            raise ConfigError(f"unknown text granularity {granularity!r}")
        self.granularity = granularity

    def score(self, article):
        return SentimentVector(*lexicon_scores(article_text(article, self.granularity)))


class PrecomputedProvider:
    """Lookup table read from a JSON-lines score file.

    Each line: ``{"firm_id", "timestamp", "headline_digest", "p_pos", "p_neg", "p_neu"}``
    where ``headline_digest`` is the SHA-256 hex digest of the UTF-8 headline.
    """

    kind = "precomputed"

    def __init__(self, path):
        self.path = Path(path)
        if not self.path.is_file():
            raise InputError(f"score file not found: {self.path}")
        self.table = {}
        with open(self.path, encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, start=1):
                raw = raw.strip()
                if not raw:
                    continue
                try:
                    rec = json.loads(raw)
                    ts = dt.datetime.fromisoformat(rec["timestamp"].replace("Z", "+00:00"))
                    key = (rec["firm_id"], ts.astimezone(dt.timezone.utc).isoformat(), rec["headline_digest"])
                    vec = SentimentVector(float(rec["p_pos"]), float(rec["p_neg"]), float(rec["p_neu"]))
                except (KeyError, ValueError, TypeError, AttributeError) as exc:
                    raise InputError(f"{self.path}:{line_no}: bad score record ({exc})") from None
                self.table[key] = vec

    def score(self, article):
        key = article_key(article)
        try:
            return self.table[key]
        except KeyError:
            raise SentimentLookupError(f"no precomputed score for article key {key}") from None

    @staticmethod
    def write(path, scored):
        """Write ``[(article, SentimentVector), ...]`` in the score-file format."""
        with open(path, "w", encoding="utf-8") as fh:
            for article, vec in scored:
                firm, ts, digest = article_key(article)
                rec = {
                    "firm_id": firm,
                    "timestamp": ts,
                    "headline_digest": digest,
                    "p_pos": vec.p_positive,
                    "p_neg": vec.p_negative,
                    "p_neu": vec.p_neutral,
                }
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


class RemoteProvider:
    """Client for an external scoring service.

    Request: ``POST <url>`` with JSON ``{"headline", "body", "text"}``.
    Response: JSON ``{"p_positive", "p_negative", "p_neutral"}``.
    Results are cached on disk under ``cache_dir`` keyed by a digest of the
    request text, one file per entry written atomically.
    """

    kind = "remote"

    def __init__(self, url, timeout=10.0, attempts=3, backoff=0.5, cache_dir=None, granularity="headline+body"):
        if attempts < 1:
            raise ConfigError("attempts must be >= 1")
        self.url = url
        self.timeout = float(timeout)
        self.attempts = int(attempts)
        self.backoff = float(backoff)
        self.granularity = granularity
        self.cache_dir = Path(cache_dir) if cache_dir else None
        if self.cache_dir:
            self.cache_dir.mkdir(parents=True, exist_ok=True)

    def _cache_path(self, text):
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        return self.cache_dir / f"{digest}.json"

    def score(self, article):
        text = article_text(article, self.granularity)
        cached = self._cache_path(text) if self.cache_dir else None
        if cached is not None and cached.exists():
            d = json.loads(cached.read_text())
            return SentimentVector(d["p_positive"], d["p_negative"], d["p_neutral"])
        vec = self._request({"headline": article.headline, "body": article.body, "text": text})
        if cached is not None:
            self._store(cached, vec)
        return vec

    def _store(self, path, vec):
        payload = json.dumps(
            {"p_positive": vec.p_positive, "p_negative": vec.p_negative, "p_neutral": vec.p_neutral}, sort_keys=True
        )
        fd, tmp = tempfile.mkstemp(dir=self.cache_dir, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            fh.write(payload)
        os.replace(tmp, path)

    def _request(self, payload):
        body = json.dumps(payload).encode("utf-8")
        last_status, last_error = None, None
        for attempt in range(1, self.attempts + 1):
            req = urllib.request.Request(self.url, data=body, headers={"Content-Type": "application/json"})
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    last_status = resp.status
                    raw = resp.read()
                d = json.loads(raw)
                return SentimentVector(float(d["p_positive"]), float(d["p_negative"]), float(d["p_neutral"]))
            except urllib.error.HTTPError as exc:
                last_status, last_error = exc.code, f"HTTP {exc.code}"
            except (urllib.error.URLError, TimeoutError, OSError) as exc:
                last_error = f"connection failure: {exc}"
            except (ValueError, KeyError, TypeError) as exc:
                last_error = f"malformed response: {exc}"
            if attempt < self.attempts:
                delay = self.backoff * 2 ** (attempt - 1)
                log.warning("sentiment request failed (%s); retrying in %.2fs", last_error, delay)
                time.sleep(delay)
        raise TransportError(f"scoring service at {self.url} failed: {last_error}", self.attempts, last_status)


def provider_from_config(cfg):
    """Build a provider from a mapping such as ``{"kind": "lexicon"}``."""
    cfg = dict(cfg or {"kind": "lexicon"})
    kind = cfg.pop("kind", "lexicon")
    if kind == "lexicon":
        return LexiconProvider(**cfg)
    if kind == "precomputed":
        return PrecomputedProvider(cfg["path"])
    if kind == "remote":
        return RemoteProvider(**cfg)
    raise ConfigError(f"unknown sentiment provider kind {kind!r}")
