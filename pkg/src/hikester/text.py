"""Bag-of-words tokenizer shared by the search index and the spam filter.

Tokens are ASCII alphanumeric runs so they double as document map keys when
models are persisted in the store.
"""

from __future__ import annotations

import re
from collections import Counter

_TOKEN_RE = re.compile(r"[a-z0-9]+")

MIN_TOKEN_LEN = 2


def tokenize(text: str) -> dict[str, int]:
    """Lowercase, split on non-alphanumerics, drop tokens shorter than 2,
    count multiplicities."""
    counts: Counter[str] = Counter()
    for token in _TOKEN_RE.findall(text.lower()):
        if len(token) >= MIN_TOKEN_LEN:
            counts[token] += 1
    return dict(counts)
