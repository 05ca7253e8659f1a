"""Platform wiring: store triggers connect moderation, recommendations,
indexing and the optimizer into one pipeline.

Write path for a new event: the API validates and commits the document, and
returns. Everything else happens through triggers, off the request path:

  /events created  -> moderation     -> writes /moderation/<id> (and flags
                                        the event + notifies its creator
                                        when the text looks like spam)
  /moderation new  -> recommendation -> scores all profiles, writes
                                        /notifications/<user>/<event>
  /events changed  -> index feed     -> geo + search indexes follow the doc
  /samples/... new -> profile / optimizer folds, threshold retrains

Trigger delivery is at-least-once, so every handler here is idempotent:
moderation keys on the /moderation doc, notifications key on
(recipient, event), sample folds track applied sample ids.

On startup the derived state (indexes, profiles, optimizer history, models)
is rebuilt from the recovered store tree before any trigger is registered.
"""

from __future__ import annotations

import logging
from datetime import date, datetime, time as dtime

from .config import Config
from .geo import GeoIndex, GeoQuery, cell_center, encode_geohash
from .model import (EventRecord, GeoPoint, InteractionSample, Notification,
                    UserProfile, new_id, normalize_tag, validate_event)
from .optimizer import Optimizer, TrainingTuple
from .recommend import Recommender, RecommendationModel
from .search import SearchIndex, SearchQuery
from .spam import SpamFilterService, NaiveBayesModel, load_corpus
from .store import (ABSENT, ChangeEvent, Filter, RealtimeStore,
                    REV_PLACEHOLDER, ValidationRejected)

log = logging.getLogger("hikester.service")


class NotFound(KeyError):
    pass


class Conflict(ValueError):
    pass


class Platform:
    def __init__(self, config: Config | None = None, data_dir: str | None = None):
        self.config = config or Config()
        if data_dir is not None:
            self.config.data_dir = data_dir
        self.store = RealtimeStore(data_dir=self.config.data_dir,
                                   snapshot_every=self.config.snapshot_every)
        self.spam = SpamFilterService(threshold=self.config.spam_threshold,
                                      alpha=self.config.spam_alpha)
        self.geo = GeoIndex()
        self.search = SearchIndex()
        self.recommender = Recommender(
            interest_threshold=self.config.interest_threshold,
            retrain_threshold=self.config.recommender_retrain_samples,
            k=self.config.kmeans_k, seed=self.config.kmeans_seed,
            action_weights=self.config.action_weights())
        self.optimizer = Optimizer(
            retrain_threshold=self.config.optimizer_retrain_tuples,
            geo_precision=self.config.geohash_precision,
            hidden=self.config.optimizer_hidden,
            epochs=self.config.optimizer_epochs,
            learning_rate=self.config.optimizer_learning_rate,
            seed=self.config.optimizer_seed,
            vocab_cap=self.config.optimizer_vocab_cap)
        self._applied_samples: set[str] = set()
        self._applied_tuples: set[str] = set()
        self._rebuild()
        self.store.register_validator("/events", self._event_validator)
        attempts = self.config.trigger_max_attempts
        self.store.register_trigger("/events", self._on_event_created,
                                    name="moderation", max_attempts=attempts)
        self.store.register_trigger("/events", self._on_event_change,
                                    name="indexes", max_attempts=attempts)
        self.store.register_trigger("/moderation", self._on_moderation,
                                    name="recommendation", max_attempts=attempts)
        self.store.register_trigger("/samples/recommender", self._on_sample,
                                    name="profile-fold", max_attempts=attempts)
        self.store.register_trigger("/samples/optimizer", self._on_tuple,
                                    name="optimizer-fold", max_attempts=attempts)
        self._moderation_sweep()

    def close(self):
        self.store.close()

    def wait_idle(self, timeout: float = 10.0) -> bool:
        return self.store.wait_idle(timeout)

    # -------------------------------------------------------------------- users

    def create_user(self, display_name: str, interest_weights: dict | None = None) -> str:
        user_id = new_id()
        profile = UserProfile(id=user_id, display_name=display_name,
                              interest_weights={
                                  normalize_tag(t): float(w)
                                  for t, w in (interest_weights or {}).items()})
        self.store.put(("users", user_id), profile.to_doc())
        for tag, w in profile.interest_weights.items():
            if w > 0:
                self.recommender.profile(user_id).weights[tag] = w
        return user_id

    def get_user(self, user_id: str) -> dict:
        doc = self.store.get(("users", user_id))
        if doc is ABSENT:
            raise NotFound(f"user {user_id}")
        return doc

    # ------------------------------------------------------------------- events

    def create_event(self, body: dict) -> tuple[str, dict]:
        """Validate, commit and return (id, doc). The downstream pipeline
        (moderation, recommendations, indexing) runs asynchronously."""
        tags = {normalize_tag(t) for t in body.get("tags", []) if normalize_tag(t)}
        start_date = body.get("start_date")
        day_of_week = body.get("day_of_week")
        if day_of_week is None and isinstance(start_date, str):
            try:
                day_of_week = date.fromisoformat(start_date).weekday()
            except ValueError:
                pass
        creator = body.get("creator")
        location = body.get("location") or {}
        candidate = {
            "title": body.get("title"),
            "description": body.get("description", ""),
            "tags": {t: True for t in sorted(tags)},
            "start_hour": body.get("start_hour"),
            "day_of_week": day_of_week,
            "start_date": start_date,
            "location": {"lat": location.get("lat"), "lon": location.get("lon")},
            "creator": creator,
            "status": "active",
        }
        if creator:
            candidate["participants"] = {creator: True}
        violations = validate_event(candidate)
        if violations:
            raise ValidationRejected(violations)
        if self.store.get(("users", creator)) is ABSENT:
            raise NotFound(f"creator {creator}")
        event_id = new_id()
        doc = dict(candidate)
        doc["id"] = event_id
        doc["location"] = {"lat": float(location["lat"]),
                           "lon": GeoPoint(location["lat"], location["lon"]).lon}
        doc["created_at"] = REV_PLACEHOLDER
        rev = self.store.put(("events", event_id), doc)
        doc["created_at"] = rev
        return event_id, doc

    def get_event(self, event_id: str, viewer: str | None = None) -> dict:
        doc = self.store.get(("events", event_id))
        if doc is ABSENT:
            raise NotFound(f"event {event_id}")
        if viewer is not None:
            self.record_sample(InteractionSample(
                user_id=viewer, event_id=event_id, action="view",
                event_tags=set(doc.get("tags", {}))))
        return doc

    def join_event(self, event_id: str, user_id: str):
        doc = self.store.get(("events", event_id))
        if doc is ABSENT:
            raise NotFound(f"event {event_id}")
        if self.store.get(("users", user_id)) is ABSENT:
            raise NotFound(f"user {user_id}")
        if doc.get("status") != "active":
            raise Conflict(f"event {event_id} is {doc.get('status')}")
        if user_id in doc.get("participants", {}):
            return  # idempotent
        self.store.put(("events", event_id, "participants", user_id), True)
        self.record_sample(InteractionSample(
            user_id=user_id, event_id=event_id, action="join",
            event_tags=set(doc.get("tags", {}))))

    def leave_event(self, event_id: str, user_id: str):
        doc = self.store.get(("events", event_id))
        if doc is ABSENT:
            raise NotFound(f"event {event_id}")
        if user_id not in doc.get("participants", {}):
            return
        self.store.delete(("events", event_id, "participants", user_id))
        self.record_sample(InteractionSample(
            user_id=user_id, event_id=event_id, action="decline",
            event_tags=set(doc.get("tags", {}))))

    # ------------------------------------------------------------------ queries

    def search_events(self, query: SearchQuery, user: str | None = None) -> list[tuple[str, float]]:
        results = self.search.search(query)
        if user is not None and query.tags:
            self.record_sample(InteractionSample(
                user_id=user, event_id="", action="search_filtered",
                filter_tags=set(query.tags)))
        return results

    def nearby(self, lat: float, lon: float, radius_km: float) -> list[tuple[str, float]]:
        return self.geo.radius_query(GeoQuery(GeoPoint(lat, lon), radius_km))

    def suggest_time(self, tags) -> list[tuple[int, float]]:
        return self.optimizer.suggest_time(set(tags))

    def suggest_date(self, tags) -> list[tuple[int, float]]:
        return self.optimizer.suggest_date(set(tags))

    def suggest_places(self, tags, hour: int | None, day_of_week: int | None, k: int):
        """Cells ranked by attendance summed across the given tags; hour and
        weekday narrow the aggregation when present."""
        totals: dict[str, int] = {}
        for tag in tags:
            for cell, count in self.optimizer.place_counts(tag, hour, day_of_week).items():
                totals[cell] = totals.get(cell, 0) + count
        ranked = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
        return [(cell, cell_center(cell), count) for cell, count in ranked]

    def recommendations(self, user_id: str) -> list[dict]:
        """The user's recommendation notifications, newest first."""
        docs = self.store.children(("notifications", user_id))
        items = [d for d in docs.values() if d.get("kind") == "recommendation"]
        items.sort(key=lambda d: (-d.get("created_at", 0), d.get("event_id", "")))
        return items

    # ------------------------------------------------------------ subscriptions

    def subscribe_events(self, sink, tags=(), hour_range=None):
        flt = Filter()
        if tags:
            flt.contains["tags"] = tuple(sorted(tags))
        if hour_range is not None:
            flt.ranges["start_hour"] = (hour_range[0], hour_range[1])
        if not flt.equals and not flt.contains and not flt.ranges:
            flt = None
        return self.store.subscribe(("events",), sink, flt)

    def subscribe_geo(self, sink, lat: float, lon: float, radius_km: float) -> str:
        q = GeoQuery(GeoPoint(lat, lon), radius_km)
        return self.geo.subscribe_geo(q, sink, rev=self.store.current_revision())

    def subscribe_notifications(self, sink, user_id: str):
        return self.store.subscribe(("notifications", user_id), sink)

    # ------------------------------------------------------- history collection

    def complete_due_events(self, now: datetime) -> int:
        """Fold events whose start moment has passed into the optimizer's
        history (attendance is final by then). Returns how many were added."""
        added = 0
        for event_id, doc in self.store.children(("events",)).items():
            if not isinstance(doc, dict) or doc.get("status") != "active":
                continue
            if self.store.get(("samples", "optimizer", event_id)) is not ABSENT:
                continue
            try:
                starts = datetime.combine(date.fromisoformat(doc["start_date"]),
                                          dtime(hour=int(doc["start_hour"])))
            except (KeyError, ValueError):
                continue
            if starts > now:
                continue
            point = GeoPoint.from_doc(doc["location"])
            record = TrainingTuple(
                tags=set(doc.get("tags", {})),
                hour=int(doc["start_hour"]),
                day_of_week=int(doc["day_of_week"]),
                geo_cell=encode_geohash(point, self.config.geohash_precision),
                attendance=len(doc.get("participants", {})),
            ).to_doc()
            record["at"] = REV_PLACEHOLDER
            self.store.put(("samples", "optimizer", event_id), record)
            added += 1
        return added

    def record_sample(self, sample: InteractionSample) -> str:
        sample_id = new_id()
        doc = sample.to_doc()
        doc["at"] = REV_PLACEHOLDER
        self.store.put(("samples", "recommender", sample_id), doc)
        return sample_id

    # ----------------------------------------------------------------- triggers

    def _event_validator(self, path, value) -> list[str]:
        if len(path) == 2 and isinstance(value, dict):
            return validate_event(value)
        return []

    def _entity_id(self, ev: ChangeEvent) -> str | None:
        return ev.path[1] if len(ev.path) >= 2 else None

    def _on_event_created(self, ev: ChangeEvent):
        if ev.kind != "created" or len(ev.path) != 2:
            return
        self._moderate(ev.path[1])

    def _moderate(self, event_id: str):
        if self.store.get(("moderation", event_id)) is not ABSENT:
            return
        doc = self.store.get(("events", event_id))
        if doc is ABSENT or not isinstance(doc, dict):
            return
        event = EventRecord.from_doc(doc)
        verdict = self.spam.moderate_event(event)
        if verdict.status == "flagged_spam":
            self.store.put(("events", event_id, "status"), "flagged_spam")
            self._write_notification(Notification(
                id=f"spam-{event_id}", recipient=event.creator, event_id=event_id,
                kind="spam_flag", created_at=0,
                body=f"Your event {event.title!r} was flagged as spam"))
        record: dict = {"event_id": event_id,
                        "verdict": verdict.status, "at": REV_PLACEHOLDER}
        if verdict.posterior is not None:
            record["posterior"] = verdict.posterior
        self.store.put(("moderation", event_id), record)

    def _on_moderation(self, ev: ChangeEvent):
        if ev.kind != "created" or len(ev.path) != 2:
            return
        if not isinstance(ev.value, dict) or ev.value.get("verdict") != "active":
            return
        doc = self.store.get(("events", ev.path[1]))
        if doc is ABSENT or doc.get("status") != "active":
            return
        event = EventRecord.from_doc(doc)
        users = self.recommender.generate_recommendations(event)
        self.notify(users, event)

    def notify(self, users, event: EventRecord):
        """One recommendation notification per user, deduplicated on
        (recipient, event) so duplicate trigger deliveries are harmless."""
        for user_id in users:
            self._write_notification(Notification(
                id=event.id, recipient=user_id, event_id=event.id,
                kind="recommendation", created_at=0,
                body=f"New event you may like: {event.title}"))

    def _write_notification(self, n: Notification):
        path = ("notifications", n.recipient, n.id)
        if self.store.get(path) is not ABSENT:
            return
        doc = n.to_doc()
        doc["created_at"] = REV_PLACEHOLDER
        self.store.put(path, doc)

    def _on_event_change(self, ev: ChangeEvent):
        if len(ev.path) == 1:
            self._resync_indexes(ev.rev)
            return
        event_id = self._entity_id(ev)
        if event_id is not None:
            self._sync_event_indexes(event_id, ev.rev)

    def _sync_event_indexes(self, event_id: str, rev: int):
        doc = self.store.get(("events", event_id))
        if doc is not ABSENT and isinstance(doc, dict) and doc.get("status") == "active":
            try:
                event = EventRecord.from_doc(doc)
            except (KeyError, ValueError):
                return
            self.geo.geo_put(event_id, event.location, tags=event.tags,
                             hour=event.start_hour, rev=rev)
            self.search.index_event(event)
        else:
            self.geo.geo_remove(event_id, rev=rev)
            self.search.remove_event(event_id)

    def _resync_indexes(self, rev: int):
        present = set(self.store.children(("events",)))
        for event_id in self.geo.ids() - present:
            self.geo.geo_remove(event_id, rev=rev)
            self.search.remove_event(event_id)
        for event_id in present:
            self._sync_event_indexes(event_id, rev)

    def _on_sample(self, ev: ChangeEvent):
        if ev.kind != "created" or len(ev.path) != 3:
            return
        sample_id = ev.path[2]
        if sample_id in self._applied_samples or not isinstance(ev.value, dict):
            return
        sample = InteractionSample.from_doc(ev.value)
        self._applied_samples.add(sample_id)
        if self.recommender.record_interaction(sample):
            self._persist_recommender_model()

    def _on_tuple(self, ev: ChangeEvent):
        if ev.kind != "created" or len(ev.path) != 3:
            return
        tuple_id = ev.path[2]
        if tuple_id in self._applied_tuples or not isinstance(ev.value, dict):
            return
        self._applied_tuples.add(tuple_id)
        before = self.optimizer.retrain_count
        self.optimizer.insert_training_tuple(TrainingTuple.from_doc(ev.value))
        if self.optimizer.retrain_count != before:
            self._persist_optimizer_models()

    # ------------------------------------------------------------- model state

    def _persist_recommender_model(self):
        model = self.recommender.model
        doc: dict = {"trained_at_samples": model.trained_at_samples}
        if model.centroids:
            doc["centroids"] = {
                str(i): {t: w for t, w in c.items()}
                for i, c in enumerate(model.centroids) if c}
        self.store.put(("system", "models", "recommender"), doc)

    def _persist_optimizer_models(self):
        count = len(self.optimizer.tuples)
        for name, model in (("optimizer_time", self.optimizer.time_model),
                            ("optimizer_date", self.optimizer.date_model)):
            if model is None:
                continue
            doc = model.to_doc()
            doc["trained_at_tuples"] = count
            self.store.put(("system", "models", name), doc)

    def _persist_spam_model(self):
        if self.spam.model is not None:
            self.store.put(("system", "models", "spam"), self.spam.model.to_doc())

    # ------------------------------------------------------------------ startup

    def _rebuild(self):
        """Derive in-memory state from the recovered store tree."""
        from .optimizer import CandidateModel

        spam_doc = self.store.get(("system", "models", "spam"))
        if spam_doc is not ABSENT:
            self.spam.model = NaiveBayesModel.from_doc(spam_doc)

        rec_doc = self.store.get(("system", "models", "recommender"))
        if rec_doc is not ABSENT:
            model = RecommendationModel(
                trained_at_samples=int(rec_doc.get("trained_at_samples", 0)))
            cents = rec_doc.get("centroids", {})
            for i in range(len(cents)):
                model.centroids.append({t: float(w) for t, w in cents[str(i)].items()})
            self.recommender.model = model

        trained_at_tuples = 0
        for name, attr in (("optimizer_time", "time_model"), ("optimizer_date", "date_model")):
            doc = self.store.get(("system", "models", name))
            if doc is not ABSENT:
                setattr(self.optimizer, attr, CandidateModel.from_doc(doc))
                trained_at_tuples = int(doc.get("trained_at_tuples", 0))

        rev = self.store.current_revision()
        for event_id in self.store.children(("events",)):
            self._sync_event_indexes(event_id, rev)

        for user_id, doc in self.store.children(("users",)).items():
            weights = doc.get("interest_weights", {}) if isinstance(doc, dict) else {}
            for tag, w in weights.items():
                if w > 0:
                    self.recommender.profile(user_id).weights[tag] = float(w)

        samples = self.store.children(("samples", "recommender"))
        for sample_id, doc in sorted(samples.items(), key=lambda kv: kv[1].get("at", 0)):
            self._applied_samples.add(sample_id)
            self.recommender.update_profile(doc["user_id"], InteractionSample.from_doc(doc))
        total = len(samples)
        self.recommender.pending_samples = max(
            0, total - self.recommender.model.trained_at_samples)

        records = self.store.children(("samples", "optimizer"))
        for tuple_id, doc in sorted(records.items(), key=lambda kv: kv[1].get("at", 0)):
            self._applied_tuples.add(tuple_id)
            t = TrainingTuple.from_doc(doc)
            self.optimizer.tuples.append(t)
            for tag in t.tags:
                cells = self.optimizer.places.setdefault(
                    (tag, t.hour, t.day_of_week), {})
                cells[t.geo_cell] = cells.get(t.geo_cell, 0) + t.attendance
        self.optimizer.pending_tuples = max(0, len(records) - trained_at_tuples)

    def _moderation_sweep(self):
        """Moderate any event the pipeline missed (e.g. crash between the
        event commit and the moderation write)."""
        for event_id in self.store.children(("events",)):
            if self.store.get(("moderation", event_id)) is ABSENT:
                self._moderate(event_id)

    # ------------------------------------------------------------------ seeding

    def seed_spam_corpus(self, path: str):
        corpus = load_corpus(path)
        self.spam.train(corpus)
        self._persist_spam_model()
        return len(corpus)

    def seed_demo(self) -> int:
        """A handful of users and events around one city center, enough to
        click through the UI against fresh data."""
        users = [
            ("Alice", {"football": 3.0, "running": 1.0}),
            ("Boris", {"chess": 2.0, "boardgames": 2.0}),
            ("Chen", {"music": 2.5, "jazz": 1.5}),
        ]
        user_ids = [self.create_user(name, weights) for name, weights in users]
        events = [
            ("Friendly football match", "Casual game at the park field",
             ["football"], 18, "2026-08-15", 55.751, 48.744),
            ("Chess evening", "Club night, boards provided",
             ["chess", "boardgames"], 19, "2026-08-13", 55.755, 48.742),
            ("Jazz on the lawn", "Open air trio, bring a blanket",
             ["music", "jazz"], 20, "2026-08-14", 55.748, 48.750),
            ("Morning run", "Easy 5k along the river",
             ["running"], 7, "2026-08-16", 55.753, 48.738),
            ("Board game night", "Snacks welcome",
             ["boardgames"], 19, "2026-08-17", 55.749, 48.741),
        ]
        for i, (title, desc, tags, hour, day, lat, lon) in enumerate(events):
            self.create_event({
                "title": title, "description": desc, "tags": tags,
                "start_hour": hour, "start_date": day,
                "location": {"lat": lat, "lon": lon},
                "creator": user_ids[i % len(user_ids)],
            })
        self.wait_idle()
        return len(users) + len(events)
