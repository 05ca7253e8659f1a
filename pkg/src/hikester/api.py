"""HTTP JSON API plus the websocket subscription channel.

Error bodies are always {code, message}. Subscription messages are
{type: snapshot|change|geo|heartbeat|error, payload}, one JSON text frame
per message; an idle stream carries heartbeats.
"""

from __future__ import annotations

import asyncio
import base64
import queue
from datetime import date, datetime, timezone

from fastapi import Body, FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from .search import SearchQuery
from .service import Conflict, NotFound, Platform
from .store import ChangeEvent, ValidationRejected, path_str
from .geo import GeoQueryEvent
from .text import tokenize


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def _encode_cursor(offset: int) -> str:
    return base64.urlsafe_b64encode(f"o:{offset}".encode()).decode()


def _decode_cursor(cursor: str) -> int:
    try:
        raw = base64.urlsafe_b64decode(cursor.encode()).decode()
        kind, _, offset = raw.partition(":")
        if kind != "o":
            raise ValueError
        return int(offset)
    except Exception:
        raise ApiError(400, "bad_cursor", "cursor is not valid")


def _page(items: list, limit: int, cursor: str | None) -> dict:
    offset = _decode_cursor(cursor) if cursor else 0
    window = items[offset:offset + limit]
    next_cursor = _encode_cursor(offset + limit) if offset + limit < len(items) else None
    return {"items": window, "next_cursor": next_cursor}


def _change_message(ev: ChangeEvent) -> dict:
    payload = {"rev": ev.rev, "path": path_str(ev.path), "kind": ev.kind}
    if ev.kind != "deleted":
        payload["value"] = ev.value
    return {"type": "snapshot" if ev.snapshot else "change", "payload": payload}


def _geo_message(ev: GeoQueryEvent) -> dict:
    return {"type": "geo", "payload": {
        "kind": ev.kind, "event_id": ev.event_id,
        "location": {"lat": ev.location.lat, "lon": ev.location.lon},
        "distance_km": ev.distance_km, "rev": ev.rev,
    }}


def create_app(platform: Platform) -> FastAPI:
    app = FastAPI(title="hikester", docs_url=None, redoc_url=None)
    config = platform.config

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "message": exc.message})

    @app.exception_handler(ValidationRejected)
    async def _validation_error(_req: Request, exc: ValidationRejected):
        return JSONResponse(status_code=400,
                            content={"code": "validation", "message": str(exc)})

    @app.exception_handler(NotFound)
    async def _not_found(_req: Request, exc: NotFound):
        return JSONResponse(status_code=404,
                            content={"code": "not_found", "message": str(exc.args[0])})

    @app.exception_handler(Conflict)
    async def _conflict(_req: Request, exc: Conflict):
        return JSONResponse(status_code=409,
                            content={"code": "conflict", "message": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def _bad_request(_req: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"code": "bad_request", "message": str(exc.errors())})

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(_req: Request, exc: StarletteHTTPException):
        code = "not_found" if exc.status_code == 404 else "http_error"
        return JSONResponse(status_code=exc.status_code,
                            content={"code": code, "message": str(exc.detail)})

    # ------------------------------------------------------------------- users

    @app.post("/users", status_code=201)
    def create_user(payload: dict = Body(...)):
        name = payload.get("display_name")
        if not isinstance(name, str) or not name.strip():
            raise ApiError(400, "validation", "display_name required")
        weights = payload.get("interest_weights") or {}
        if not isinstance(weights, dict):
            raise ApiError(400, "validation", "interest_weights must be a map")
        user_id = platform.create_user(name.strip(), weights)
        return {"id": user_id, "rev": platform.store.current_revision(), "time": _now_iso()}

    @app.get("/users/{user_id}")
    def get_user(user_id: str):
        return platform.get_user(user_id)

    # ------------------------------------------------------------------ events

    @app.post("/events", status_code=201)
    def create_event(payload: dict = Body(...)):
        event_id, doc = platform.create_event(payload)
        return {"id": event_id, "rev": doc["created_at"], "time": _now_iso()}

    @app.get("/events/nearby")
    def nearby(lat: float, lon: float, radius_km: float):
        if radius_km <= 0:
            raise ApiError(400, "bad_request", "radius_km must be positive")
        items = []
        for event_id, distance in platform.nearby(lat, lon, radius_km):
            event = platform.store.get(("events", event_id))
            items.append({"id": event_id, "distance_km": distance, "event": event})
        return {"items": items}

    @app.get("/events/{event_id}")
    def get_event(event_id: str, user: str | None = None):
        return platform.get_event(event_id, viewer=user)

    @app.post("/events/{event_id}/join")
    def join_event(event_id: str, payload: dict = Body(...)):
        user_id = payload.get("user_id")
        if not user_id:
            raise ApiError(400, "validation", "user_id required")
        platform.join_event(event_id, user_id)
        return {"ok": True, "rev": platform.store.current_revision(), "time": _now_iso()}

    @app.post("/events/{event_id}/leave")
    def leave_event(event_id: str, payload: dict = Body(...)):
        user_id = payload.get("user_id")
        if not user_id:
            raise ApiError(400, "validation", "user_id required")
        platform.leave_event(event_id, user_id)
        return {"ok": True, "rev": platform.store.current_revision(), "time": _now_iso()}

    # ------------------------------------------------------------------- search

    @app.get("/search")
    def search(q: str = "", tags: str = "", hour_min: int | None = None,
               hour_max: int | None = None, date_from: str | None = None,
               date_to: str | None = None, limit: int | None = None,
               user: str | None = None):
        terms = list(tokenize(q)) if q else []
        tag_set = {t.strip().lower() for t in tags.split(",") if t.strip()}
        hour_range = None
        if hour_min is not None or hour_max is not None:
            hour_range = (hour_min if hour_min is not None else 0,
                          hour_max if hour_max is not None else 23)
        date_range = None
        if date_from or date_to:
            try:
                date_range = (date.fromisoformat(date_from) if date_from else date.min,
                              date.fromisoformat(date_to) if date_to else date.max)
            except ValueError:
                raise ApiError(400, "bad_request", "dates must be ISO 8601")
        try:
            query = SearchQuery(text_terms=terms, tags=tag_set, hour_range=hour_range,
                                date_range=date_range, limit=limit or config.page_limit)
        except ValueError as exc:
            raise ApiError(400, "bad_request", str(exc))
        results = platform.search_events(query, user=user)
        items = []
        for event_id, score in results:
            event = platform.store.get(("events", event_id))
            items.append({"id": event_id, "score": score, "event": event})
        return {"items": items}

    # -------------------------------------------------------------- suggestions

    def _require_tags(tags: str) -> set[str]:
        tag_set = {t.strip().lower() for t in tags.split(",") if t.strip()}
        if not tag_set:
            raise ApiError(400, "bad_request", "tags parameter required")
        return tag_set

    @app.get("/suggest/time")
    def suggest_time(tags: str = ""):
        ranking = platform.suggest_time(_require_tags(tags))
        return {"items": [{"hour": h, "score": s} for h, s in ranking]}

    @app.get("/suggest/date")
    def suggest_date(tags: str = ""):
        ranking = platform.suggest_date(_require_tags(tags))
        return {"items": [{"day_of_week": d, "score": s} for d, s in ranking]}

    @app.get("/suggest/places")
    def suggest_places(tags: str = "", hour: int | None = None,
                       day_of_week: int | None = None, k: int = 5):
        ranked = platform.suggest_places(_require_tags(tags), hour, day_of_week, k)
        return {"items": [
            {"cell": cell, "center": {"lat": center.lat, "lon": center.lon},
             "attendance": count}
            for cell, center, count in ranked]}

    # ---------------------------------------------------------- recommendations

    @app.get("/recommendations/{user_id}")
    def recommendations(user_id: str, limit: int | None = None,
                        cursor: str | None = None):
        items = platform.recommendations(user_id)
        return _page(items, limit or config.page_limit, cursor)

    # ------------------------------------------------------------- subscription

    @app.websocket("/subscribe")
    async def subscribe(ws: WebSocket):
        await ws.accept()
        try:
            request = await ws.receive_json()
        except Exception:
            await ws.close()
            return
        out: queue.Queue = queue.Queue()
        cleanup = []
        try:
            variants = [k for k in ("events", "geo", "notifications") if k in (request or {})]
            if not isinstance(request, dict) or len(variants) != 1:
                await ws.send_json({"type": "error", "payload": {
                    "code": "bad_request",
                    "message": "exactly one of events/geo/notifications required"}})
                await ws.close()
                return
            kind = variants[0]
            spec = request[kind] or {}
            if kind == "events":
                tags = {str(t).lower() for t in spec.get("tags", [])}
                hour_range = None
                if "hour_min" in spec or "hour_max" in spec:
                    hour_range = (int(spec.get("hour_min", 0)), int(spec.get("hour_max", 23)))
                sub = platform.subscribe_events(
                    lambda ev: out.put(_change_message(ev)), tags=tags, hour_range=hour_range)
                cleanup.append(sub.unsubscribe)
            elif kind == "geo":
                try:
                    lat, lon = float(spec["lat"]), float(spec["lon"])
                    radius = float(spec["radius_km"])
                    if radius <= 0:
                        raise ValueError
                except (KeyError, TypeError, ValueError):
                    await ws.send_json({"type": "error", "payload": {
                        "code": "bad_request", "message": "geo needs lat, lon, radius_km > 0"}})
                    await ws.close()
                    return
                gid = platform.subscribe_geo(
                    lambda ev: out.put(_geo_message(ev)), lat, lon, radius)
                cleanup.append(lambda: platform.geo.unsubscribe_geo(gid))
            else:
                user_id = spec.get("user_id")
                if not user_id:
                    await ws.send_json({"type": "error", "payload": {
                        "code": "bad_request", "message": "notifications needs user_id"}})
                    await ws.close()
                    return
                sub = platform.subscribe_notifications(
                    lambda ev: out.put(_change_message(ev)), user_id)
                cleanup.append(sub.unsubscribe)

            loop = asyncio.get_running_loop()
            idle = 0.0
            poll = min(0.25, max(0.05, config.heartbeat_seconds / 4))
            while True:
                msg = await loop.run_in_executor(None, _poll_queue, out, poll)
                if msg is None:
                    idle += poll
                    if idle >= config.heartbeat_seconds:
                        idle = 0.0
                        await ws.send_json({"type": "heartbeat", "payload": {
                            "rev": platform.store.current_revision(),
                            "time": _now_iso()}})
                    continue
                idle = 0.0
                await ws.send_json(msg)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            for fn in cleanup:
                try:
                    fn()
                except Exception:
                    pass
            out.put(None)  # release a poll thread still blocked on the queue

    return app


def _poll_queue(q: queue.Queue, timeout: float):
    try:
        return q.get(timeout=timeout)
    except queue.Empty:
        return None
