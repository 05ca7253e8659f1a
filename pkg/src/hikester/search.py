"""In-memory inverted index over events with tf-idf ranking.

Text terms are OR-matched and their tf*idf contributions summed; structured
filters (tags, hour range, date range) are AND-restrictions on the candidate
set. idf = ln(1 + N/df) with N the number of indexed events. Ties rank by
ascending event id, so results are fully deterministic.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from datetime import date

from .model import EventRecord
from .text import tokenize


@dataclass
class SearchQuery:
    text_terms: list[str] = field(default_factory=list)
    tags: set[str] = field(default_factory=set)
    hour_range: tuple[int, int] | None = None
    date_range: tuple[date, date] | None = None
    limit: int = 50

    def __post_init__(self):
        if self.limit <= 0:
            raise ValueError("limit must be positive")
        if not (self.text_terms or self.tags or self.hour_range or self.date_range):
            raise ValueError("query needs at least one of text, tags or a range")


@dataclass
class _DocEntry:
    terms: dict[str, int]
    tags: frozenset
    hour: int
    day: date


class SearchIndex:
    def __init__(self):
        self._postings: dict[str, dict[str, int]] = {}
        self._docs: dict[str, _DocEntry] = {}
        self._lock = threading.RLock()

    def __len__(self):
        return len(self._docs)

    def document_count(self) -> int:
        return len(self._docs)

    def postings(self, term: str) -> list[tuple[str, int]]:
        """Posting list of (event_id, tf), sorted by event id."""
        with self._lock:
            return sorted(self._postings.get(term, {}).items())

    def index_event(self, e: EventRecord):
        """Index (or re-index) one event; old postings are replaced."""
        terms = tokenize(e.title + " " + e.description)
        with self._lock:
            self.remove_event(e.id)
            self._docs[e.id] = _DocEntry(
                terms=terms, tags=frozenset(e.tags), hour=e.start_hour, day=e.start_date)
            for term, tf in terms.items():
                self._postings.setdefault(term, {})[e.id] = tf

    def remove_event(self, event_id: str):
        with self._lock:
            entry = self._docs.pop(event_id, None)
            if entry is None:
                return
            for term in entry.terms:
                bucket = self._postings.get(term)
                if bucket is not None:
                    bucket.pop(event_id, None)
                    if not bucket:
                        del self._postings[term]

    def search(self, q: SearchQuery) -> list[tuple[str, float]]:
        """Ranked (event_id, score) list, highest score first."""
        with self._lock:
            n = len(self._docs)
            if q.text_terms:
                candidates = set()
                for term in q.text_terms:
                    candidates.update(self._postings.get(term, {}))
            else:
                candidates = set(self._docs)

            results = []
            for event_id in candidates:
                entry = self._docs[event_id]
                if q.tags and not q.tags <= entry.tags:
                    continue
                if q.hour_range is not None:
                    lo, hi = q.hour_range
                    if not lo <= entry.hour <= hi:
                        continue
                if q.date_range is not None:
                    lo, hi = q.date_range
                    if not lo <= entry.day <= hi:
                        continue
                score = 0.0
                for term in q.text_terms:
                    tf = entry.terms.get(term, 0)
                    df = len(self._postings.get(term, {}))
                    if tf and df:
                        score += tf * math.log(1 + n / df)
                results.append((event_id, score))

        results.sort(key=lambda pair: (-pair[1], pair[0]))
        return results[: q.limit]
