"""Suggests event parameters (hour, weekday, places) from past attendance.

Two small neural models score candidate hours (24) and weekdays (7) for a
tag set, each trained on accumulated (tags, candidate) -> attendance tuples
and retrained after every N new tuples. Until a first training has happened,
a per-candidate mean-attendance histogram answers instead, so suggestions
work from startup. "Best places" is an exact aggregation: cumulative
attendance per geohash cell, keyed by (tag, hour, weekday).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .geo import cell_center
from .mlp import Mlp
from .model import GeoPoint

HOURS = list(range(24))
WEEKDAYS = list(range(7))


@dataclass
class TrainingTuple:
    tags: set[str]
    hour: int
    day_of_week: int
    geo_cell: str
    attendance: int

    def __post_init__(self):
        if self.attendance < 0:
            raise ValueError("attendance must be non-negative")

    def to_doc(self) -> dict:
        doc: dict = {
            "hour": self.hour,
            "day_of_week": self.day_of_week,
            "geo_cell": self.geo_cell,
            "attendance": self.attendance,
        }
        if self.tags:
            doc["tags"] = {t: True for t in sorted(self.tags)}
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "TrainingTuple":
        return cls(
            tags=set(doc.get("tags", {})),
            hour=int(doc["hour"]),
            day_of_week=int(doc["day_of_week"]),
            geo_cell=doc["geo_cell"],
            attendance=int(doc["attendance"]),
        )


@dataclass
class Activity:
    """One user-activity-handler request.

    kinds: event_created (historical tuple for training), suggest_time,
    suggest_date, popular_places.
    """

    kind: str
    tuple: TrainingTuple | None = None
    tags: set[str] = field(default_factory=set)
    hour: int | None = None
    day_of_week: int | None = None
    k: int = 5


class CandidateModel:
    """Scores each candidate value (hour or weekday) for a tag set.

    Input is a multi-hot tag vector over a capped vocabulary joined with a
    one-hot candidate; the target is attendance scaled by the training
    maximum, so the sigmoid output stays in range. Reported scores are
    rescaled back to attendance units.
    """

    def __init__(self, candidates: int, vocab: list[str], net: Mlp, max_attendance: int):
        self.candidates = candidates
        self.vocab = vocab
        self.net = net
        self.max_attendance = max(1, max_attendance)

    def _features(self, tags, candidate: int) -> np.ndarray:
        x = np.zeros(len(self.vocab) + self.candidates)
        for t in tags:
            try:
                x[self.vocab.index(t)] = 1.0
            except ValueError:
                pass
        x[len(self.vocab) + candidate] = 1.0
        return x

    def score(self, tags, candidate: int) -> float:
        x = self._features(tags, candidate)
        return float(self.net.predict(x)[0, 0]) * self.max_attendance

    def to_doc(self) -> dict:
        doc: dict = {
            "candidates": self.candidates,
            "max_attendance": self.max_attendance,
            "net": self.net.to_doc(),
        }
        if self.vocab:
            doc["vocab"] = {str(i): t for i, t in enumerate(self.vocab)}
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "CandidateModel":
        vocab_doc = doc.get("vocab", {})
        vocab = [vocab_doc[str(i)] for i in range(len(vocab_doc))]
        return cls(
            candidates=int(doc["candidates"]),
            vocab=vocab,
            net=Mlp.from_doc(doc["net"]),
            max_attendance=int(doc["max_attendance"]),
        )


def train_candidate_model(tuples: list[TrainingTuple], candidates: int,
                          candidate_of, vocab_cap: int = 64, hidden: int = 16,
                          epochs: int = 800, learning_rate: float = 2.0,
                          seed: int = 0) -> CandidateModel:
    vocab: list[str] = []
    seen = set()
    for t in tuples:
        for tag in sorted(t.tags):
            if tag not in seen and len(vocab) < vocab_cap:
                seen.add(tag)
                vocab.append(tag)
    max_att = max((t.attendance for t in tuples), default=0)
    max_att = max(1, max_att)
    x = np.zeros((len(tuples), len(vocab) + candidates))
    y = np.zeros((len(tuples), 1))
    tag_index = {t: i for i, t in enumerate(vocab)}
    for row, t in enumerate(tuples):
        for tag in t.tags:
            i = tag_index.get(tag)
            if i is not None:
                x[row, i] = 1.0
        x[row, len(vocab) + candidate_of(t)] = 1.0
        y[row, 0] = t.attendance / max_att
    net = Mlp(x.shape[1], hidden, 1, seed=seed, loss="mse")
    net.train(x, y, epochs=epochs, learning_rate=learning_rate)
    return CandidateModel(candidates, vocab, net, max_att)


class Optimizer:
    def __init__(self, retrain_threshold: int = 50, geo_precision: int = 5,
                 hidden: int = 16, epochs: int = 800, learning_rate: float = 2.0,
                 seed: int = 0, vocab_cap: int = 64):
        self.retrain_threshold = retrain_threshold
        self.geo_precision = geo_precision
        self.hidden = hidden
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.seed = seed
        self.vocab_cap = vocab_cap
        self.tuples: list[TrainingTuple] = []
        self.pending_tuples = 0
        self.retrain_count = 0
        self.time_model: CandidateModel | None = None
        self.date_model: CandidateModel | None = None
        self.places: dict[tuple[str, int, int], dict[str, int]] = {}
        self._lock = threading.RLock()

    # ------------------------------------------------------------- activity fan-in

    def handle_activity(self, a: Activity):
        if a.kind == "event_created":
            if a.tuple is None:
                raise ValueError("event_created activity needs a training tuple")
            self.insert_training_tuple(a.tuple)
            return None
        if a.kind == "suggest_time":
            return self.suggest_time(a.tags)
        if a.kind == "suggest_date":
            return self.suggest_date(a.tags)
        if a.kind == "popular_places":
            tag = next(iter(sorted(a.tags)), "")
            return self.popular_places(tag, a.hour or 0, a.day_of_week or 0, a.k)
        raise ValueError(f"unknown activity kind {a.kind!r}")

    def insert_training_tuple(self, t: TrainingTuple):
        """Append to both training sets and the places aggregation, then
        retrain once every ``retrain_threshold`` inserts."""
        with self._lock:
            self.tuples.append(t)
            for tag in t.tags:
                cells = self.places.setdefault((tag, t.hour, t.day_of_week), {})
                cells[t.geo_cell] = cells.get(t.geo_cell, 0) + t.attendance
            self.pending_tuples += 1
            if self.pending_tuples >= self.retrain_threshold:
                self.retrain()

    # ---------------------------------------------------------------- suggestions

    def suggest_time(self, tags) -> list[tuple[int, float]]:
        """All 24 hours ranked by predicted attendance, best first."""
        return self._suggest(tags, HOURS, self.time_model, lambda t: t.hour)

    def suggest_date(self, tags) -> list[tuple[int, float]]:
        """All 7 weekdays (0 = Monday) ranked by predicted attendance."""
        return self._suggest(tags, WEEKDAYS, self.date_model, lambda t: t.day_of_week)

    def _suggest(self, tags, candidates, model, candidate_of):
        if model is not None:
            scored = [(c, model.score(tags, c)) for c in candidates]
        else:
            scored = self._histogram(candidates, candidate_of)
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        return scored

    def _histogram(self, candidates, candidate_of):
        """Untrained fallback: mean attendance per candidate value."""
        with self._lock:
            sums = {c: 0.0 for c in candidates}
            counts = {c: 0 for c in candidates}
            for t in self.tuples:
                c = candidate_of(t)
                sums[c] += t.attendance
                counts[c] += 1
        return [(c, sums[c] / counts[c] if counts[c] else 0.0) for c in candidates]

    def popular_places(self, tag: str, hour: int, day_of_week: int,
                       k: int) -> list[tuple[str, GeoPoint, int]]:
        """Top-k cells by cumulative attendance for the exact key, with cell
        centers; an unknown key yields an empty list."""
        cells = self.place_counts(tag, hour, day_of_week)
        ranked = sorted(cells.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
        return [(cell, cell_center(cell), count) for cell, count in ranked]

    def place_counts(self, tag: str | None = None, hour: int | None = None,
                     day_of_week: int | None = None) -> dict[str, int]:
        """Cell -> attendance totals over all keys matching the given
        (tag, hour, day) components; None matches everything."""
        totals: dict[str, int] = {}
        with self._lock:
            for (t, h, d), cells in self.places.items():
                if tag is not None and t != tag:
                    continue
                if hour is not None and h != hour:
                    continue
                if day_of_week is not None and d != day_of_week:
                    continue
                for cell, count in cells.items():
                    totals[cell] = totals.get(cell, 0) + count
        return totals

    # ------------------------------------------------------------------ training

    def retrain(self):
        """Train both candidate models on the full accumulated set and swap
        them in; an empty set keeps the histogram fallback."""
        with self._lock:
            tuples = list(self.tuples)
            self.pending_tuples = 0
            self.retrain_count += 1
            if not tuples:
                return
            self.time_model = train_candidate_model(
                tuples, 24, lambda t: t.hour, vocab_cap=self.vocab_cap,
                hidden=self.hidden, epochs=self.epochs,
                learning_rate=self.learning_rate, seed=self.seed)
            self.date_model = train_candidate_model(
                tuples, 7, lambda t: t.day_of_week, vocab_cap=self.vocab_cap,
                hidden=self.hidden, epochs=self.epochs,
                learning_rate=self.learning_rate, seed=self.seed)
