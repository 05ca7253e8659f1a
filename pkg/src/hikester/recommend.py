"""Interest profiles, user grouping and recommendation generation.

Profiles are a pure fold of the interaction log: each action adjusts the
acting user's per-tag weights (join +2.0, view +0.5, filtered search +0.25,
decline -1.0, floored at zero by default). An event is recommended to every
user whose profile points in its tag direction strongly enough, measured by
cosine similarity against the event's binary tag vector. Users are grouped
by spherical k-means over their profiles; the model retrains after every N
new samples and swaps in atomically.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .model import EventRecord, InteractionSample

DEFAULT_ACTION_WEIGHTS = {
    "join": 2.0,
    "view": 0.5,
    "search_filtered": 0.25,
    "decline": -1.0,
}


@dataclass
class InterestProfile:
    user_id: str
    weights: dict[str, float] = field(default_factory=dict)
    group_id: int | None = None
    samples_seen: int = 0


@dataclass
class RecommendationModel:
    centroids: list[dict[str, float]] = field(default_factory=list)
    trained_at_samples: int = 0


def score_interest(weights: dict[str, float], event_tags) -> float:
    """Cosine similarity between a profile and an event's binary tag vector;
    0 for an empty profile, 1 only for a parallel nonzero one."""
    tags = set(event_tags)
    if not tags or not weights:
        return 0.0
    dot = sum(weights.get(t, 0.0) for t in tags)
    norm = np.sqrt(sum(w * w for w in weights.values()))
    if norm == 0 or dot == 0:
        return 0.0
    return float(dot / (norm * np.sqrt(len(tags))))


def kmeans_cosine(vectors: np.ndarray, k: int, seed: int = 0,
                  max_iterations: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Spherical k-means: rows must be unit vectors. Returns (centroids,
    assignments). Empty clusters are reseeded from the farthest point."""
    n = vectors.shape[0]
    k = min(k, n)
    rng = np.random.RandomState(seed)
    centroids = vectors[rng.choice(n, size=k, replace=False)].copy()
    assignment = np.full(n, -1)
    for _ in range(max_iterations):
        sims = vectors @ centroids.T
        new_assignment = np.argmax(sims, axis=1)
        for c in range(k):
            members = vectors[new_assignment == c]
            if len(members) == 0:
                own_sim = sims[np.arange(n), new_assignment]
                farthest = int(np.argmin(own_sim))
                centroids[c] = vectors[farthest]
                new_assignment[farthest] = c
                continue
            mean = members.mean(axis=0)
            norm = np.linalg.norm(mean)
            if norm == 0:
                centroids[c] = members[0]
            else:
                centroids[c] = mean / norm
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
    return centroids, assignment


class Recommender:
    """Profile bookkeeping plus the grouping model. Store plumbing (sample
    persistence, notification writes) lives with the service wiring."""

    def __init__(self, interest_threshold: float = 0.3, retrain_threshold: int = 100,
                 k: int = 8, seed: int = 0,
                 action_weights: dict[str, float] | None = None):
        self.interest_threshold = interest_threshold
        self.retrain_threshold = retrain_threshold
        self.k = k
        self.seed = seed
        self.action_weights = dict(action_weights or DEFAULT_ACTION_WEIGHTS)
        self.profiles: dict[str, InterestProfile] = {}
        self.model = RecommendationModel()
        self.pending_samples = 0
        self.retrain_count = 0
        self._lock = threading.RLock()

    def profile(self, user_id: str) -> InterestProfile:
        with self._lock:
            prof = self.profiles.get(user_id)
            if prof is None:
                prof = InterestProfile(user_id=user_id)
                self.profiles[user_id] = prof
            return prof

    def update_profile(self, user_id: str, sample: InteractionSample) -> InterestProfile:
        """Apply one sample's per-tag weight adjustments, floored at zero."""
        delta = self.action_weights[sample.action]
        with self._lock:
            prof = self.profile(user_id)
            for tag in sample.effective_tags():
                prof.weights[tag] = max(0.0, prof.weights.get(tag, 0.0) + delta)
            prof.samples_seen += 1
            return prof

    def record_interaction(self, sample: InteractionSample) -> bool:
        """Fold a sample into its user's profile; returns True when the
        sample tipped the retrain threshold (and a retrain ran)."""
        with self._lock:
            self.update_profile(sample.user_id, sample)
            self.pending_samples += 1
            return self.retrain_if_needed()

    def generate_recommendations(self, e: EventRecord) -> list[str]:
        """User ids to notify: every user scoring at or above the threshold,
        except the creator and current participants, best match first."""
        if e.status != "active":
            return []
        excluded = {e.creator} | set(e.participants)
        with self._lock:
            scored = []
            for user_id, prof in self.profiles.items():
                if user_id in excluded:
                    continue
                s = score_interest(prof.weights, e.tags)
                if s >= self.interest_threshold:
                    scored.append((-s, user_id))
        scored.sort()
        return [user_id for _, user_id in scored]

    def assign_group(self, prof: InterestProfile) -> int | None:
        """Nearest centroid by cosine similarity; None before any training."""
        with self._lock:
            if not self.model.centroids:
                return None
            best, best_sim = 0, -np.inf
            for i, centroid in enumerate(self.model.centroids):
                sim = _profile_centroid_sim(prof.weights, centroid)
                if sim > best_sim:
                    best, best_sim = i, sim
            return best

    def retrain_if_needed(self) -> bool:
        with self._lock:
            if self.pending_samples < self.retrain_threshold:
                return False
            self.retrain()
            return True

    def retrain(self):
        """Cluster all nonzero profiles and swap the model in atomically."""
        with self._lock:
            users = sorted(u for u, p in self.profiles.items()
                           if any(w > 0 for w in p.weights.values()))
            self.pending_samples = 0
            self.retrain_count += 1
            if not users:
                self.model = RecommendationModel()
                return
            vocab = sorted({t for u in users for t, w in self.profiles[u].weights.items() if w > 0})
            index = {t: i for i, t in enumerate(vocab)}
            vectors = np.zeros((len(users), len(vocab)))
            for row, u in enumerate(users):
                for t, w in self.profiles[u].weights.items():
                    if w > 0:
                        vectors[row, index[t]] = w
            vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
            centroids, assignment = kmeans_cosine(vectors, self.k, seed=self.seed)
            model = RecommendationModel(trained_at_samples=sum(
                p.samples_seen for p in self.profiles.values()))
            for centroid in centroids:
                model.centroids.append({
                    vocab[i]: float(x) for i, x in enumerate(centroid) if x != 0.0})
            self.model = model
            for row, u in enumerate(users):
                self.profiles[u].group_id = int(assignment[row])


def _profile_centroid_sim(weights: dict[str, float], centroid: dict[str, float]) -> float:
    dot = sum(w * centroid.get(t, 0.0) for t, w in weights.items())
    norm = np.sqrt(sum(w * w for w in weights.values()))
    cnorm = np.sqrt(sum(c * c for c in centroid.values()))
    if norm == 0 or cnorm == 0:
        return 0.0
    return float(dot / (norm * cnorm))
