"""Geohash encoding and a radius-query index with live subscriptions.

Distances are great-circle kilometers on a sphere of radius 6371.0 km and
radius queries use an inclusive boundary (distance <= radius). Query planning
covers the disc with the center geohash cell plus its 8 neighbors at the
coarsest precision whose cell sides both exceed twice the radius; degenerate
cases (poles, oversized radius) fall back to a full scan, and every candidate
is post-filtered by exact haversine distance.
"""

from __future__ import annotations

import bisect
import math
import threading
from dataclasses import dataclass, field
from typing import Callable

from .model import GeoPoint, normalize_lon

BASE32 = "0123456789bcdefghjkmnpqrstuvwxyz"
_BASE32_INDEX = {c: i for i, c in enumerate(BASE32)}

EARTH_RADIUS_KM = 6371.0
KM_PER_DEG = math.pi * EARTH_RADIUS_KM / 180.0

MAX_PRECISION = 12

# cover_radius marker: scan everything, no useful cell cover exists
FULL_SCAN = "*"


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in km."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def encode_geohash(p: GeoPoint, precision: int) -> str:
    """Interleaved lon/lat bisection, 5 bits per base32 character."""
    if not 1 <= precision <= MAX_PRECISION:
        raise ValueError(f"precision {precision} out of range 1..{MAX_PRECISION}")
    lat_lo, lat_hi = -90.0, 90.0
    lon_lo, lon_hi = -180.0, 180.0
    chars = []
    even_bit = True  # longitude first
    while len(chars) < precision:
        ch = 0
        for bit in range(5):
            if even_bit:
                mid = (lon_lo + lon_hi) / 2
                if p.lon >= mid:
                    ch |= 1 << (4 - bit)
                    lon_lo = mid
                else:
                    lon_hi = mid
            else:
                mid = (lat_lo + lat_hi) / 2
                if p.lat >= mid:
                    ch |= 1 << (4 - bit)
                    lat_lo = mid
                else:
                    lat_hi = mid
            even_bit = not even_bit
        chars.append(BASE32[ch])
    return "".join(chars)


def decode_geohash(code: str) -> tuple[float, float, float, float]:
    """Exact cell bounds (lat_min, lat_max, lon_min, lon_max) of a geohash."""
    if not code or len(code) > MAX_PRECISION:
        raise ValueError("invalid geohash")
    lat_lo, lat_hi = -90.0, 90.0
    lon_lo, lon_hi = -180.0, 180.0
    even_bit = True
    for c in code:
        if c not in _BASE32_INDEX:
            raise ValueError("invalid geohash")
        idx = _BASE32_INDEX[c]
        for bit in range(5):
            mask = 1 << (4 - bit)
            if even_bit:
                mid = (lon_lo + lon_hi) / 2
                if idx & mask:
                    lon_lo = mid
                else:
                    lon_hi = mid
            else:
                mid = (lat_lo + lat_hi) / 2
                if idx & mask:
                    lat_lo = mid
                else:
                    lat_hi = mid
            even_bit = not even_bit
    return lat_lo, lat_hi, lon_lo, lon_hi


def cell_center(code: str) -> GeoPoint:
    lat_lo, lat_hi, lon_lo, lon_hi = decode_geohash(code)
    return GeoPoint((lat_lo + lat_hi) / 2, (lon_lo + lon_hi) / 2)


def cell_size_deg(precision: int) -> tuple[float, float]:
    """(lat_height, lon_width) of one cell in degrees."""
    bits = 5 * precision
    lon_bits = (bits + 1) // 2
    lat_bits = bits // 2
    return 180.0 / (1 << lat_bits), 360.0 / (1 << lon_bits)


@dataclass
class GeoQuery:
    center: GeoPoint
    radius_km: float
    tags: frozenset = frozenset()
    hour_range: tuple | None = None

    def __post_init__(self):
        if self.radius_km <= 0:
            raise ValueError("radius_km must be positive")

    def admits(self, tags: frozenset, hour: int | None) -> bool:
        if self.tags and not self.tags <= tags:
            return False
        if self.hour_range is not None:
            lo, hi = self.hour_range
            if hour is None or not lo <= hour <= hi:
                return False
        return True


@dataclass
class GeoQueryEvent:
    kind: str  # entered | exited | moved
    event_id: str
    location: GeoPoint
    distance_km: float
    rev: int = 0


def cover_radius(q: GeoQuery) -> set[str]:
    """Geohash prefixes whose union contains the query disc.

    Returns {FULL_SCAN} when no useful cover exists (huge radius or a disc
    touching a pole, where cell neighbors are undefined).
    """
    rdeg = q.radius_km / KM_PER_DEG
    worst_abs_lat = max(abs(q.center.lat - rdeg), abs(q.center.lat + rdeg))
    if worst_abs_lat >= 90.0:
        return {FULL_SCAN}
    cos_worst = math.cos(math.radians(worst_abs_lat))
    precision = 0
    for p in range(MAX_PRECISION, 0, -1):
        lat_h, lon_w = cell_size_deg(p)
        if lat_h * KM_PER_DEG > 2 * q.radius_km and lon_w * KM_PER_DEG * cos_worst > 2 * q.radius_km:
            precision = p
            break
    if precision == 0:
        return {FULL_SCAN}
    center_cell = encode_geohash(q.center, precision)
    lat_lo, lat_hi, lon_lo, lon_hi = decode_geohash(center_cell)
    lat_c, lon_c = (lat_lo + lat_hi) / 2, (lon_lo + lon_hi) / 2
    lat_h, lon_w = lat_hi - lat_lo, lon_hi - lon_lo
    cells = set()
    for dlat in (-1, 0, 1):
        nb_lat = lat_c + dlat * lat_h
        if not -90.0 <= nb_lat <= 90.0:
            return {FULL_SCAN}
        for dlon in (-1, 0, 1):
            nb_lon = normalize_lon(lon_c + dlon * lon_w)
            cells.add(encode_geohash(GeoPoint(nb_lat, nb_lon), precision))
    return cells


class _GeoSub:
    def __init__(self, sub_id: str, query: GeoQuery, sink: Callable[[GeoQueryEvent], None]):
        self.id = sub_id
        self.query = query
        self.sink = sink
        self.inside: set[str] = set()
        self.dead = False


@dataclass
class _Entry:
    point: GeoPoint
    code: str
    tags: frozenset = frozenset()
    hour: int | None = None


class GeoIndex:
    """Latest location per event id, with one-shot and live radius queries.

    Updates are expected to arrive serialized (the store trigger that feeds
    the index is); queries may run concurrently and see a consistent state.
    """

    def __init__(self):
        self._entries: dict[str, _Entry] = {}
        self._sorted: list[tuple[str, str]] = []  # (geohash12, id), sorted
        self._subs: dict[str, _GeoSub] = {}
        self._counter = 0
        self._lock = threading.RLock()

    def __len__(self):
        return len(self._entries)

    def ids(self) -> set[str]:
        with self._lock:
            return set(self._entries)

    def geo_put(self, event_id: str, p: GeoPoint, tags=frozenset(), hour=None, rev: int = 0):
        tags = frozenset(tags)
        with self._lock:
            old = self._entries.get(event_id)
            if old is not None:
                self._sorted.remove((old.code, event_id))
            entry = _Entry(p, encode_geohash(p, MAX_PRECISION), tags, hour)
            self._entries[event_id] = entry
            bisect.insort(self._sorted, (entry.code, event_id))
            self._notify(event_id, old, entry, rev)

    def geo_remove(self, event_id: str, rev: int = 0):
        with self._lock:
            old = self._entries.pop(event_id, None)
            if old is None:
                return
            self._sorted.remove((old.code, event_id))
            self._notify(event_id, old, None, rev)

    def radius_query(self, q: GeoQuery) -> list[tuple[str, float]]:
        """(event_id, distance_km) pairs within the disc, ascending distance."""
        with self._lock:
            hits = []
            for event_id in self._candidates(q):
                entry = self._entries[event_id]
                if not q.admits(entry.tags, entry.hour):
                    continue
                d = haversine_km(q.center, entry.point)
                if d <= q.radius_km:
                    hits.append((event_id, d))
        hits.sort(key=lambda pair: (pair[1], pair[0]))
        return hits

    def subscribe_geo(self, q: GeoQuery, sink: Callable[[GeoQueryEvent], None],
                      rev: int = 0) -> str:
        """Live radius query: snapshot of entered events, then deltas."""
        with self._lock:
            self._counter += 1
            sub = _GeoSub(f"g{self._counter}", q, sink)
            for event_id, dist in self.radius_query(q):
                sub.inside.add(event_id)
                self._emit(sub, GeoQueryEvent("entered", event_id,
                                              self._entries[event_id].point, dist, rev))
                if sub.dead:
                    break
            if not sub.dead:
                self._subs[sub.id] = sub
            return sub.id

    def unsubscribe_geo(self, sub_id: str):
        with self._lock:
            self._subs.pop(sub_id, None)

    # ----------------------------------------------------------------- internal

    def _candidates(self, q: GeoQuery):
        cover = cover_radius(q)
        if FULL_SCAN in cover:
            return list(self._entries)
        ids = []
        for prefix in cover:
            lo = bisect.bisect_left(self._sorted, (prefix, ""))
            hi = bisect.bisect_left(self._sorted, (prefix + "\x7f", ""))
            ids.extend(event_id for _, event_id in self._sorted[lo:hi])
        return ids

    def _notify(self, event_id: str, old: _Entry | None, new: _Entry | None, rev: int):
        for sub in list(self._subs.values()):
            q = sub.query
            was_in = event_id in sub.inside
            now_in = False
            dist = 0.0
            if new is not None and q.admits(new.tags, new.hour):
                dist = haversine_km(q.center, new.point)
                now_in = dist <= q.radius_km
            if now_in and not was_in:
                sub.inside.add(event_id)
                self._emit(sub, GeoQueryEvent("entered", event_id, new.point, dist, rev))
            elif now_in and was_in:
                if old is None or old.point != new.point:
                    self._emit(sub, GeoQueryEvent("moved", event_id, new.point, dist, rev))
            elif was_in and not now_in:
                sub.inside.discard(event_id)
                point = new.point if new is not None else old.point
                d = haversine_km(q.center, point)
                self._emit(sub, GeoQueryEvent("exited", event_id, point, d, rev))

    def _emit(self, sub: _GeoSub, ev: GeoQueryEvent):
        try:
            sub.sink(ev)
        except Exception:
            sub.dead = True
            self._subs.pop(sub.id, None)
