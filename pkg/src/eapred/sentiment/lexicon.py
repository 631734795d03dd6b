"""Word-count sentiment scorer used for tests and synthetic corpora.

Makes no claim of matching a trained financial language model; it only has to
be deterministic and monotone in the tone words it sees.
"""

from __future__ import annotations

import re

POSITIVE_WORDS = (
    "beats", "beat", "profit", "profits", "rises", "rise", "gains", "gain", "strong", "surge",
    "surges", "growth", "record", "upgrade", "upgraded", "outperform", "raises", "exceeds",
    "robust", "bullish",
)
NEGATIVE_WORDS = (
    "misses", "miss", "loss", "losses", "falls", "fall", "drops", "drop", "weak", "plunge",
    "plunges", "decline", "declines", "downgrade", "downgraded", "underperform", "cuts",
    "lawsuit", "warning", "bearish",
)
NEUTRAL_WORDS = (
    "announces", "reports", "schedules", "maintains", "files", "holds", "expects", "confirms",
    "updates", "reiterates", "plans", "meeting", "conference", "statement", "guidance",
)

_TOKEN = re.compile(r"[a-z]+")
_POS, _NEG, _NEU = frozenset(POSITIVE_WORDS), frozenset(NEGATIVE_WORDS), frozenset(NEUTRAL_WORDS)


def count_tones(text):
    pos = neg = neu = 0
    for tok in _TOKEN.findall(text.lower()):
        if tok in _POS:
            pos += 1
        elif tok in _NEG:
            neg += 1
        elif tok in _NEU:
            neu += 1
    return pos, neg, neu


def lexicon_scores(text):
    """Return ``(p_pos, p_neg, p_neu)`` with add-one smoothing; (0, 0, 1) when no tone word occurs."""
    pos, neg, neu = count_tones(text)
    if pos + neg + neu == 0:
        return 0.0, 0.0, 1.0
    total = pos + neg + neu + 3
    return (pos + 1) / total, (neg + 1) / total, (neu + 1) / total
