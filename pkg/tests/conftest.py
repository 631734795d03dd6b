import datetime as dt
import json

import pytest

SCHEMA = "eapred/1"


def write_tables(directory, prices, events, fundamentals=(), news=(), fund_ok=True, news_ok=True):
    """Write the four input tables from row tuples; returns the directory."""
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "prices.csv", "w") as fh:
        fh.write(f"#schema={SCHEMA}\nfirm_id,date,adjusted_close\n")
        for row in prices:
            fh.write(",".join(str(c) for c in row) + "\n")
    with open(directory / "events.csv", "w") as fh:
        fh.write(f"#schema={SCHEMA}\nfirm_id,announcement_date,after_market_close\n")
        for row in events:
            fh.write(",".join(str(c) for c in row) + "\n")
    if fund_ok:
        with open(directory / "fundamentals.csv", "w") as fh:
            fh.write(f"#schema={SCHEMA}\nfirm_id,effective_date,metric,value\n")
            for row in fundamentals:
                fh.write(",".join(str(c) for c in row) + "\n")
    if news_ok:
        with open(directory / "news.jsonl", "w") as fh:
            fh.write(json.dumps({"schema": SCHEMA}) + "\n")
            for firm, ts, headline, body in news:
                fh.write(json.dumps({"firm_id": firm, "timestamp": ts, "headline": headline, "body": body}) + "\n")
    return directory


def daily_prices(firm, start, days, price=lambda i: 100.0 + i, weekdays_only=True):
    rows = []
    for i in range(days):
        d = start + dt.timedelta(days=i)
        if weekdays_only and d.weekday() >= 5:
            continue
        rows.append((firm, d.isoformat(), repr(float(price(i)))))
    return rows


@pytest.fixture
def tables(tmp_path):
    def make(**kw):
        return write_tables(tmp_path / "in", **kw)

    return make
