import math
import random
from datetime import date, timedelta

import pytest

from hikester.model import EventRecord, GeoPoint
from hikester.search import SearchIndex, SearchQuery
from hikester.text import tokenize

WORDS = ["alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf",
         "hotel", "india", "juliet"]
TAGS = ["music", "sport", "food", "tech"]


def make_event(event_id, title, description="", tags=("music",), hour=12,
               day=date(2026, 8, 15)):
    return EventRecord(
        id=event_id, title=title, description=description, tags=set(tags),
        start_hour=hour, day_of_week=day.weekday(), start_date=day,
        location=GeoPoint(0, 0), creator="u", participants={"u"})


def brute_force_search(events, q: SearchQuery):
    """Independent scan + scorer over raw event records."""
    n = len(events)
    docs = {e.id: tokenize(e.title + " " + e.description) for e in events.values()}

    def df(term):
        return sum(1 for terms in docs.values() if term in terms)

    out = []
    for e in events.values():
        terms = docs[e.id]
        if q.text_terms and not any(t in terms for t in q.text_terms):
            continue
        if q.tags and not q.tags <= e.tags:
            continue
        if q.hour_range and not q.hour_range[0] <= e.start_hour <= q.hour_range[1]:
            continue
        if q.date_range and not q.date_range[0] <= e.start_date <= q.date_range[1]:
            continue
        score = sum(terms.get(t, 0) * math.log(1 + n / df(t))
                    for t in q.text_terms if terms.get(t, 0) and df(t))
        out.append((e.id, score))
    out.sort(key=lambda pair: (-pair[1], pair[0]))
    return out[: q.limit]


class TestIndexing:
    def test_index_then_search_unique_word(self):
        idx = SearchIndex()
        idx.index_event(make_event("e1", "zanzibar trip"))
        assert [i for i, _ in idx.search(SearchQuery(text_terms=["zanzibar"]))] == ["e1"]

    def test_reindex_replaces_old_terms(self):
        idx = SearchIndex()
        idx.index_event(make_event("e1", "zanzibar trip"))
        idx.index_event(make_event("e1", "bergen hike"))
        assert idx.search(SearchQuery(text_terms=["zanzibar"])) == []
        assert [i for i, _ in idx.search(SearchQuery(text_terms=["bergen"]))] == ["e1"]

    def test_remove(self):
        idx = SearchIndex()
        idx.remove_event("nope")  # no-op
        idx.index_event(make_event("e1", "zanzibar"))
        idx.remove_event("e1")
        assert idx.search(SearchQuery(text_terms=["zanzibar"])) == []
        assert idx.document_count() == 0

    def test_posting_lists_sorted_by_event_id(self):
        idx = SearchIndex()
        for event_id in ["e9", "e1", "e5"]:
            idx.index_event(make_event(event_id, "common word"))
        assert [i for i, _ in idx.postings("common")] == ["e1", "e5", "e9"]
        assert idx.document_count() == 3


class TestScoring:
    def test_two_docs_ln3(self):
        idx = SearchIndex()
        idx.index_event(make_event("e1", "zanzibar trip"))
        idx.index_event(make_event("e2", "bergen hike"))
        results = idx.search(SearchQuery(text_terms=["zanzibar"]))
        assert [i for i, _ in results] == ["e1"]
        assert abs(results[0][1] - math.log(3)) < 1e-12

    def test_tf_multiplies(self):
        idx = SearchIndex()
        idx.index_event(make_event("e1", "go go go"))
        idx.index_event(make_event("e2", "go slow"))
        results = dict(idx.search(SearchQuery(text_terms=["go"])))
        assert abs(results["e1"] - 3 * math.log(2)) < 1e-12
        assert abs(results["e2"] - 1 * math.log(2)) < 1e-12

    def test_empty_index(self):
        assert SearchIndex().search(SearchQuery(text_terms=["x"])) == []

    def test_tag_filter_excludes_text_match(self):
        idx = SearchIndex()
        idx.index_event(make_event("e1", "concert night", tags=("music",)))
        idx.index_event(make_event("e2", "concert night", tags=("sport",)))
        results = idx.search(SearchQuery(text_terms=["concert"], tags={"music"}))
        assert [i for i, _ in results] == ["e1"]

    def test_structured_only_query(self):
        idx = SearchIndex()
        idx.index_event(make_event("e1", "a1", hour=10))
        idx.index_event(make_event("e2", "a2", hour=20))
        results = idx.search(SearchQuery(hour_range=(18, 23)))
        assert [i for i, _ in results] == ["e2"]
        assert results[0][1] == 0.0

    def test_or_matching_summed_scoring(self):
        idx = SearchIndex()
        idx.index_event(make_event("e1", "alpha bravo"))
        idx.index_event(make_event("e2", "alpha"))
        idx.index_event(make_event("e3", "charlie"))
        results = idx.search(SearchQuery(text_terms=["alpha", "bravo"]))
        assert [i for i, _ in results][:2] == ["e1", "e2"]

    def test_determinism_and_tiebreak(self):
        idx = SearchIndex()
        for event_id in ["e3", "e1", "e2"]:
            idx.index_event(make_event(event_id, "same text"))
        q = SearchQuery(text_terms=["same"])
        first = idx.search(q)
        assert first == idx.search(q)
        assert [i for i, _ in first] == ["e1", "e2", "e3"]

    def test_limit(self):
        idx = SearchIndex()
        for i in range(10):
            idx.index_event(make_event(f"e{i}", "word"))
        assert len(idx.search(SearchQuery(text_terms=["word"], limit=3))) == 3


class TestOracleEquivalence:
    def test_fuzz_against_brute_force(self):
        rng = random.Random(11)
        for corpus_size in (0, 1, 13, 200):
            idx = SearchIndex()
            events = {}
            base = date(2026, 1, 1)
            for i in range(corpus_size):
                e = make_event(
                    f"e{i:04d}",
                    title=" ".join(rng.choices(WORDS, k=rng.randint(1, 6))),
                    description=" ".join(rng.choices(WORDS, k=rng.randint(0, 8))),
                    tags=rng.sample(TAGS, rng.randint(1, 3)),
                    hour=rng.randrange(24),
                    day=base + timedelta(days=rng.randrange(300)),
                )
                events[e.id] = e
                idx.index_event(e)
            # random removals keep the oracle honest
            for event_id in rng.sample(sorted(events), k=len(events) // 5):
                idx.remove_event(event_id)
                del events[event_id]
            for _ in range(40):
                q = SearchQuery(
                    text_terms=rng.choices(WORDS, k=rng.randint(1, 3)),
                    tags=set(rng.sample(TAGS, rng.randint(0, 2))),
                    hour_range=(0, rng.randrange(24)) if rng.random() < 0.5 else None,
                    date_range=(base, base + timedelta(days=rng.randrange(400)))
                    if rng.random() < 0.5 else None,
                    limit=rng.choice([3, 50, 1000]),
                ) if rng.random() < 0.8 else SearchQuery(
                    tags={rng.choice(TAGS)},
                    hour_range=(rng.randrange(12), rng.randrange(12, 24)))
                got = idx.search(q)
                want = brute_force_search(events, q)
                assert [i for i, _ in got] == [i for i, _ in want]
                for (_, s1), (_, s2) in zip(got, want):
                    assert abs(s1 - s2) < 1e-12


def test_query_validation():
    with pytest.raises(ValueError):
        SearchQuery()
    with pytest.raises(ValueError):
        SearchQuery(text_terms=["x"], limit=0)
