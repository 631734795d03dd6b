import datetime as dt
import json
import random

import numpy as np
import pytest

from conftest import daily_prices, write_tables
from eapred.data import IngestConfig, IngestReport, SyntheticSpec, generate_synthetic, ingest, load_dataset, write_dataset
from eapred.data.io import dataset_digest
from eapred.data.split import split_events, split_sizes
from eapred.data.synthetic import draw_announcement_returns
from eapred.data.types import EventRef
from eapred.errors import ConfigError, InputError, MalformedRowError, SizingError, ValidationError
from eapred.labeling import label_dataset
from eapred.numerics import RngStream

D0 = dt.date(2023, 1, 2)


def _basic(tables, news=(), prices=None, events=None, **kw):
    prices = prices if prices is not None else daily_prices("AAA", D0, 60)
    events = events if events is not None else [("AAA", "2023-02-15", "false")]
    return ingest(IngestConfig.from_directory(tables(prices=prices, events=events, news=news, **kw)))


class TestIngest:
    def test_identical_articles_stored_once(self, tables):
        art = ("AAA", "2023-02-01T14:00:00+00:00", "AAA beats", "profit rises")
        ds = _basic(tables, news=[art, art])
        assert len(ds["AAA"].articles) == 1

    def test_empty_news_file(self, tables):
        ds = _basic(tables)
        assert ds["AAA"].articles == []
        assert len(ds["AAA"].bars) > 0

    def test_bars_sorted_from_shuffled_input(self, tables):
        rows = daily_prices("AAA", D0, 60)
        shuffled = rows[:]
        random.Random(3).shuffle(shuffled)
        ds = _basic(tables, prices=shuffled)
        got = [(b.date.isoformat(), b.adjusted_close) for b in ds["AAA"].bars]
        assert got == sorted((d, float(p)) for _, d, p in rows)

    def test_articles_sorted_chronologically(self, tables):
        news = [
            ("AAA", "2023-02-03T14:00:00+00:00", "b", "x"),
            ("AAA", "2023-02-01T14:00:00+00:00", "a", "x"),
            ("AAA", "2023-02-02T09:00:00-05:00", "c", "x"),
        ]
        ds = _basic(tables, news=news)
        ts = [a.timestamp for a in ds["AAA"].articles]
        assert ts == sorted(ts)

    def test_malformed_row_reports_file_line_column(self, tables):
        rows = daily_prices("AAA", D0, 10)
        rows.insert(2, ("AAA", "2023-13-45", "1.0"))
        with pytest.raises(MalformedRowError) as err:
            _basic(tables, prices=rows, events=[("AAA", "2023-01-04", "false")])
        e = err.value
        assert e.path.endswith("prices.csv") and e.line == 5 and e.column == "date"

    def test_duplicate_bar_is_validation_error(self, tables):
        rows = daily_prices("AAA", D0, 10)
        rows.append(rows[0])
        with pytest.raises(ValidationError, match="duplicate price bar"):
            _basic(tables, prices=rows, events=[("AAA", "2023-01-04", "false")])

    def test_event_outside_bar_range(self, tables):
        with pytest.raises(ValidationError, match="outside bar range"):
            _basic(tables, events=[("AAA", "2024-01-01", "false")])

    def test_duplicate_event(self, tables):
        ev = ("AAA", "2023-02-15", "false")
        with pytest.raises(ValidationError, match="duplicate event"):
            _basic(tables, events=[ev, ev])

    def test_missing_prices_names_path(self, tmp_path):
        cfg = IngestConfig(prices=tmp_path / "nope.csv", events=tmp_path / "events.csv")
        with pytest.raises(InputError, match="nope.csv"):
            ingest(cfg)

    def test_missing_schema_line(self, tables):
        d = tables(prices=daily_prices("AAA", D0, 5), events=[])
        text = (d / "prices.csv").read_text().split("\n", 1)[1]
        (d / "prices.csv").write_text(text)
        with pytest.raises(MalformedRowError, match="schema"):
            ingest(IngestConfig.from_directory(d))

    def test_firms_without_events_flagged(self, tables):
        prices = daily_prices("AAA", D0, 60) + daily_prices("BBB", D0, 60)
        report = IngestReport()
        d = tables(prices=prices, events=[("AAA", "2023-02-15", "true")])
        ds = ingest(IngestConfig.from_directory(d), report)
        assert set(ds) == {"AAA", "BBB"}
        assert report.firms_without_events == ["BBB"]

    def test_fundamentals_missing_values_absent(self, tables):
        fund = [("AAA", "2023-01-02", "roe", "0.1"), ("AAA", "2023-01-02", "eps", "")]
        ds = _basic(tables, fundamentals=fund)
        assert ds["AAA"].fundamentals[0].values == {"roe": 0.1}

    def test_roundtrip_is_idempotent(self, tmp_path):
        ds = generate_synthetic(n_firms=3, months=4, seed=5)
        write_dataset(ds, tmp_path / "a")
        again = load_dataset(tmp_path / "a")
        assert again == ds
        m = write_dataset(again, tmp_path / "b")
        assert m["digest"] == dataset_digest(tmp_path / "a")

    def test_manifest_row_counts_match_fixture(self, tables):
        prices = daily_prices("AAA", D0, 60)
        fund = [("AAA", "2023-01-02", "roe", "0.1")]
        news = [("AAA", "2023-02-01T14:00:00+00:00", "h", "b")]
        d = tables(prices=prices, events=[("AAA", "2023-02-15", "false")], fundamentals=fund, news=news)
        report = IngestReport()
        ingest(IngestConfig.from_directory(d), report)
        assert report.row_counts == {"prices": len(prices), "fundamentals": 1, "news": 1, "events": 1}


class TestSynthetic:
    def test_same_seed_byte_identical(self, tmp_path):
        a = write_dataset(generate_synthetic(n_firms=4, months=3, seed=9), tmp_path / "a")
        b = write_dataset(generate_synthetic(n_firms=4, months=3, seed=9), tmp_path / "b")
        for name in ("prices.csv", "fundamentals.csv", "news.jsonl", "events.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert a["digest"] == b["digest"]

    def test_different_seed_differs(self):
        assert generate_synthetic(n_firms=2, months=3, seed=1) != generate_synthetic(n_firms=2, months=3, seed=2)

    @pytest.mark.parametrize("rho", [-0.1, 1.5])
    def test_fidelity_out_of_range(self, rho):
        with pytest.raises(ConfigError):
            generate_synthetic(n_firms=1, months=3, sentiment_fidelity=rho)

    def test_events_quarterly_and_in_range(self):
        for ds in generate_synthetic(n_firms=5, months=10, seed=2).values():
            dates = [e.announcement_date for e in ds.events]
            assert all(ds.first_date <= d <= ds.last_date for d in dates)
            gaps = np.diff([d.toordinal() for d in dates])
            assert np.all((gaps >= 80) & (gaps <= 100))

    def test_announcement_variance_matches_config(self):
        spec = SyntheticSpec()
        r = draw_announcement_returns(RngStream(0).substream("t"), 100_000, spec)
        assert abs(r.var() / spec.announcement_vol**2 - 1) < 0.05

    def test_mean_daily_absolute_return(self):
        spec = SyntheticSpec(n_firms=480, months=10, seed=4)
        ds = generate_synthetic(spec)
        rets = []
        for firm in ds.values():
            p = np.array([b.adjusted_close for b in firm.bars])
            r = p[1:] / p[:-1] - 1  # r[i] is the return into bar i + 1
            dates = [b.date for b in firm.bars]
            ea = {dates.index(le.ea_date) - 1 for le in label_dataset({firm.firm_id: firm})[0]}
            rets.append(np.delete(r, sorted(ea)))
        rets = np.concatenate(rets)
        assert rets.size >= 100_000
        expected = spec.daily_vol * np.sqrt(2 / np.pi)
        assert abs(np.abs(rets).mean() / expected - 1) < 0.05

    def test_news_batches_overlap_but_merge(self):
        ds = generate_synthetic(n_firms=3, months=6, seed=1)
        for firm in ds.values():
            keys = [a.key for a in firm.articles]
            assert len(keys) == len(set(keys))


class TestSplit:
    def test_sizes_floor_then_remainder(self):
        assert split_sizes(10, (0.7, 0.15, 0.15)) == [7, 1, 2]

    @pytest.mark.parametrize("n", [1, 3, 10, 17, 101, 1000])
    def test_sizes_sum_and_bound(self, n):
        fr = (0.7, 0.15, 0.15)
        s = split_sizes(n, fr)
        assert sum(s) == n
        assert all(abs(k - n * f) < 1 for k, f in zip(s, fr))

    def test_all_train(self):
        refs = [EventRef(D0 + dt.timedelta(days=i), "A") for i in range(5)]
        tr, va, te = split_events(refs, (1.0, 0.0, 0.0))
        assert len(tr) == 5 and not va and not te

    def test_same_date_tie_break_by_firm(self):
        refs = [EventRef(D0, f) for f in ("C", "A", "B", "D")]
        tr, va, te = split_events(refs, (0.5, 0.25, 0.25))
        assert [r.firm_id for r in tr + va + te] == ["A", "B", "C", "D"]

    def test_temporal_disjoint(self):
        ds = generate_synthetic(n_firms=20, months=10, seed=3)
        tr, va, te = split_events(ds)
        assert max(r.announcement_date for r in tr) <= min(r.announcement_date for r in te)
        assert len(set(tr) | set(va) | set(te)) == len(tr) + len(va) + len(te)

    def test_too_few_events(self):
        with pytest.raises(SizingError):
            split_events([EventRef(D0, "A"), EventRef(D0, "B")])

    def test_bad_fractions(self):
        with pytest.raises(ConfigError):
            split_sizes(10, (0.5, 0.2, 0.2))
