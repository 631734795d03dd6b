"""Temporal train/validation/test partitioning of announcement events."""

from __future__ import annotations

import math

from eapred.data.types import EventRef
from eapred.errors import ConfigError, SizingError


def split_sizes(n, fractions):
    """Floor each share, then hand leftover events to the largest fractional parts.

    Ties in the fractional part go to the later split, so 10 events at
    0.7/0.15/0.15 become 7/1/2.
    """
    if any(f < 0 for f in fractions) or not math.isclose(sum(fractions), 1.0, abs_tol=1e-9):
        raise ConfigError(f"split fractions must be non-negative and sum to 1, got {fractions}")
    exact = [n * f for f in fractions]
    sizes = [math.floor(x + 1e-9) for x in exact]
    remainder = n - sum(sizes)
    rank = sorted(range(len(fractions)), key=lambda i: (-round(exact[i] - sizes[i], 9), -i))
    for i in rank[:remainder]:
        sizes[i] += 1
    return sizes


def event_refs(datasets):
    refs = [EventRef(e.announcement_date, firm_id) for firm_id, ds in datasets.items() for e in ds.events]
    return sorted(refs)


def split_events(datasets_or_refs, fractions=(0.7, 0.15, 0.15)):
    """Order events by (announcement date, firm id) and cut them into consecutive blocks."""
    if isinstance(datasets_or_refs, dict):
        refs = event_refs(datasets_or_refs)
    else:
        refs = sorted(datasets_or_refs)
    active = sum(1 for f in fractions if f > 0)
    if len(refs) < active:
        raise SizingError(f"{len(refs)} events cannot fill {active} non-empty splits")
    sizes = split_sizes(len(refs), fractions)
    out, start = [], 0
    for s in sizes:
        out.append(refs[start : start + s])
        start += s
    return tuple(out)
