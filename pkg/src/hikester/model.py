"""Shared domain types and validation rules.

Everything here is a plain value type. Documents cross module boundaries in
their serialized tree form (nested dicts, see ``store``): sets become maps of
``key -> True`` because the document tree has no array type, which also means
tags and ids must stay within the path segment alphabet ``[A-Za-z0-9_-]``.
"""

from __future__ import annotations

import re
import secrets
from dataclasses import dataclass, field
from datetime import date

EVENT_STATUSES = ("active", "flagged_spam", "cancelled")
INTERACTION_ACTIONS = ("search_filtered", "view", "join", "decline")
NOTIFICATION_KINDS = ("recommendation", "spam_flag", "system")

_TAG_RE = re.compile(r"^[a-z0-9_-]+$")


def new_id() -> str:
    """20 character URL-safe random id."""
    return secrets.token_urlsafe(15)


def normalize_lon(lon: float) -> float:
    """Wrap a longitude into [-180, 180)."""
    return (float(lon) + 180.0) % 360.0 - 180.0


def normalize_tag(tag: str) -> str:
    return tag.strip().lower()


@dataclass(frozen=True)
class GeoPoint:
    """A point on the sphere. Latitude must be in range, longitude wraps."""

    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} out of range [-90, 90]")
        object.__setattr__(self, "lon", normalize_lon(self.lon))

    def to_doc(self) -> dict:
        return {"lat": self.lat, "lon": self.lon}

    @classmethod
    def from_doc(cls, doc: dict) -> "GeoPoint":
        return cls(lat=float(doc["lat"]), lon=float(doc["lon"]))


@dataclass
class EventRecord:
    id: str
    title: str
    description: str
    tags: set[str]
    start_hour: int
    day_of_week: int  # 0 = Monday
    start_date: date
    location: GeoPoint
    creator: str
    participants: set[str]
    status: str = "active"
    created_at: int = 0

    def to_doc(self) -> dict:
        doc = {
            "id": self.id,
            "title": self.title,
            "description": self.description,
            "start_hour": self.start_hour,
            "day_of_week": self.day_of_week,
            "start_date": self.start_date.isoformat(),
            "location": self.location.to_doc(),
            "creator": self.creator,
            "status": self.status,
            "created_at": self.created_at,
        }
        if self.tags:
            doc["tags"] = {t: True for t in sorted(self.tags)}
        if self.participants:
            doc["participants"] = {u: True for u in sorted(self.participants)}
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "EventRecord":
        return cls(
            id=doc["id"],
            title=doc.get("title", ""),
            description=doc.get("description", ""),
            tags=set(doc.get("tags", {})),
            start_hour=int(doc["start_hour"]),
            day_of_week=int(doc["day_of_week"]),
            start_date=date.fromisoformat(doc["start_date"]),
            location=GeoPoint.from_doc(doc["location"]),
            creator=doc["creator"],
            participants=set(doc.get("participants", {})),
            status=doc.get("status", "active"),
            created_at=int(doc.get("created_at", 0)),
        )


@dataclass
class UserProfile:
    id: str
    display_name: str
    interest_weights: dict[str, float] = field(default_factory=dict)
    group_id: int | None = None

    def to_doc(self) -> dict:
        doc: dict = {"id": self.id, "display_name": self.display_name}
        if self.interest_weights:
            doc["interest_weights"] = dict(self.interest_weights)
        if self.group_id is not None:
            doc["group_id"] = self.group_id
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "UserProfile":
        return cls(
            id=doc["id"],
            display_name=doc.get("display_name", ""),
            interest_weights={t: float(w) for t, w in doc.get("interest_weights", {}).items()},
            group_id=doc.get("group_id"),
        )


@dataclass
class Notification:
    id: str
    recipient: str
    event_id: str
    kind: str
    created_at: int
    body: str = ""

    def to_doc(self) -> dict:
        return {
            "id": self.id,
            "recipient": self.recipient,
            "event_id": self.event_id,
            "kind": self.kind,
            "created_at": self.created_at,
            "body": self.body,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Notification":
        return cls(
            id=doc["id"],
            recipient=doc["recipient"],
            event_id=doc["event_id"],
            kind=doc["kind"],
            created_at=int(doc.get("created_at", 0)),
            body=doc.get("body", ""),
        )


@dataclass
class InteractionSample:
    """One user action feeding the recommender.

    ``filter_tags`` is only populated for ``search_filtered`` actions;
    ``event_tags`` carries a snapshot of the event's tags for the other
    actions so that profile rebuilds fold deterministically from the log.
    """

    user_id: str
    event_id: str
    action: str
    filter_tags: set[str] = field(default_factory=set)
    event_tags: set[str] = field(default_factory=set)
    at: int = 0

    def __post_init__(self):
        if self.action not in INTERACTION_ACTIONS:
            raise ValueError(f"unknown action {self.action!r}")
        if (self.action == "search_filtered") != bool(self.filter_tags):
            raise ValueError("filter_tags must be set exactly for search_filtered actions")

    def effective_tags(self) -> set[str]:
        return self.filter_tags if self.action == "search_filtered" else self.event_tags

    def to_doc(self) -> dict:
        doc: dict = {"user_id": self.user_id, "action": self.action, "at": self.at}
        if self.event_id:
            doc["event_id"] = self.event_id
        if self.filter_tags:
            doc["filter_tags"] = {t: True for t in sorted(self.filter_tags)}
        if self.event_tags:
            doc["event_tags"] = {t: True for t in sorted(self.event_tags)}
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "InteractionSample":
        return cls(
            user_id=doc["user_id"],
            event_id=doc.get("event_id", ""),
            action=doc["action"],
            filter_tags=set(doc.get("filter_tags", {})),
            event_tags=set(doc.get("event_tags", {})),
            at=int(doc.get("at", 0)),
        )


def validate_event(candidate: dict) -> list[str]:
    """Check an event document (without id) against every field rule.

    Returns the list of violations; an empty list means the candidate is ok.
    Pure: same input, same verdict.
    """
    violations = []

    title = candidate.get("title")
    if not isinstance(title, str) or not title.strip():
        violations.append("title empty")
    if not isinstance(candidate.get("description", ""), str):
        violations.append("description not text")

    status = candidate.get("status", "active")
    if status not in EVENT_STATUSES:
        violations.append("status unknown")

    tags = candidate.get("tags") or {}
    if isinstance(tags, dict):
        tag_names = list(tags)
    elif isinstance(tags, (list, set, tuple)):
        tag_names = list(tags)
    else:
        tag_names = []
        violations.append("tags malformed")
    if status == "active" and not tag_names:
        violations.append("tags empty")
    for t in tag_names:
        if not isinstance(t, str) or not _TAG_RE.match(t):
            violations.append(f"tag {t!r} invalid (lowercase [a-z0-9_-] required)")

    hour = candidate.get("start_hour")
    if not isinstance(hour, int) or isinstance(hour, bool) or not 0 <= hour <= 23:
        violations.append("start_hour out of range")

    start_date = candidate.get("start_date")
    parsed_date = None
    if isinstance(start_date, date):
        parsed_date = start_date
    elif isinstance(start_date, str):
        try:
            parsed_date = date.fromisoformat(start_date)
        except ValueError:
            pass
    if parsed_date is None:
        violations.append("start_date not an ISO date")

    dow = candidate.get("day_of_week")
    if not isinstance(dow, int) or isinstance(dow, bool) or not 0 <= dow <= 6:
        violations.append("day_of_week out of range")
    elif parsed_date is not None and parsed_date.weekday() != dow:
        violations.append("day_of_week inconsistent with start_date")

    loc = candidate.get("location")
    if not isinstance(loc, dict) or "lat" not in loc or "lon" not in loc:
        violations.append("location malformed")
    else:
        lat, lon = loc.get("lat"), loc.get("lon")
        if not isinstance(lat, (int, float)) or isinstance(lat, bool) or not -90 <= lat <= 90:
            violations.append("location.lat out of range")
        if not isinstance(lon, (int, float)) or isinstance(lon, bool):
            violations.append("location.lon not a number")

    creator = candidate.get("creator")
    if not isinstance(creator, str) or not creator:
        violations.append("creator missing")

    participants = candidate.get("participants") or {}
    names = set(participants) if isinstance(participants, (dict, set, list, tuple)) else set()
    if status == "active" and creator and creator not in names:
        violations.append("creator not in participants")

    return violations
