"""Embedded realtime document store.

A single tree of documents with one total commit order. Every committed write
produces a ChangeEvent with a fresh revision. Observers come in two flavors:

* subscriptions: snapshot-then-delta streams, optionally filtered, delivered
  on a dedicated worker per subscription so user callbacks never run under
  store locks;
* triggers: at-least-once change handlers registered on a path prefix, each
  serialized in revision order on its own worker, with retry and a dead
  letter document under /system/dead_letters when a handler keeps failing.

Persistence is an append-only change log (``store.log``, one JSON object per
line) plus periodic full-tree snapshots (``store.snapshot.<rev>.json``).
Recovery loads the newest snapshot and replays the log tail.
"""

from __future__ import annotations

import copy
import json
import logging
import math
import os
import queue
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

log = logging.getLogger("hikester.store")

SEGMENT_RE = re.compile(r"^[A-Za-z0-9_-]+$")

# Server-value placeholder: a map value equal to this is replaced by the
# commit revision, so documents can carry their own revision number.
REV_PLACEHOLDER = {"_sv": "revision"}


class _Absent:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "ABSENT"

    def __bool__(self):
        return False


ABSENT = _Absent()

DocumentPath = tuple[str, ...]
PathLike = "str | Sequence[str]"


class InvalidPath(ValueError):
    pass


class InvalidValue(ValueError):
    pass


class ValidationRejected(ValueError):
    """A registered validator refused the write."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


def parse_path(path) -> DocumentPath:
    """Normalize ``"/a/b"``, ``"a/b"`` or an iterable of segments to a tuple."""
    if isinstance(path, str):
        trimmed = path.removeprefix("/").removesuffix("/")
        segments = trimmed.split("/") if trimmed else []
    elif isinstance(path, Iterable):
        segments = list(path)
    else:
        raise InvalidPath(f"not a path: {path!r}")
    if not segments:
        raise InvalidPath("empty path")
    for seg in segments:
        if not isinstance(seg, str) or not SEGMENT_RE.match(seg):
            raise InvalidPath(f"invalid path segment {seg!r}")
    return tuple(segments)


def path_str(path: DocumentPath) -> str:
    return "/" + "/".join(path)


def _check_value(value, depth: int = 0):
    if depth > 64:
        raise InvalidValue("value tree too deep")
    if value is None or isinstance(value, (bool, str)):
        return
    if isinstance(value, (int, float)):
        if isinstance(value, float) and not math.isfinite(value):
            raise InvalidValue("non-finite number")
        return
    if isinstance(value, dict):
        if value == REV_PLACEHOLDER:
            return
        if not value:
            raise InvalidValue("empty map not allowed; delete the path instead")
        for k, v in value.items():
            if not isinstance(k, str) or not SEGMENT_RE.match(k):
                raise InvalidValue(f"invalid map key {k!r}")
            _check_value(v, depth + 1)
        return
    raise InvalidValue(f"unsupported value type {type(value).__name__}")


def _fill_placeholders(value, rev: int):
    if isinstance(value, dict):
        if value == REV_PLACEHOLDER:
            return rev
        return {k: _fill_placeholders(v, rev) for k, v in value.items()}
    return value


def _is_prefix(prefix: DocumentPath, path: DocumentPath) -> bool:
    return len(prefix) <= len(path) and path[: len(prefix)] == prefix


@dataclass
class ChangeEvent:
    rev: int
    path: DocumentPath
    kind: str  # created | updated | deleted
    value: Any = None
    snapshot: bool = False  # synthetic snapshot-phase event, not from the log

    def to_record(self) -> dict:
        rec = {"rev": self.rev, "path": path_str(self.path), "kind": self.kind}
        if self.kind != "deleted":
            rec["value"] = self.value
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "ChangeEvent":
        return cls(
            rev=int(rec["rev"]),
            path=parse_path(rec["path"]),
            kind=rec["kind"],
            value=rec.get("value"),
        )


@dataclass
class Filter:
    """Conjunction of field equality, set membership and numeric range tests.

    Evaluated against entity documents (maps). Set membership checks that the
    named field, stored as a ``key -> True`` map, contains every given key.
    """

    equals: dict[str, Any] = field(default_factory=dict)
    contains: dict[str, tuple] = field(default_factory=dict)
    ranges: dict[str, tuple] = field(default_factory=dict)

    def matches(self, doc) -> bool:
        if not isinstance(doc, dict):
            return False
        for f, expected in self.equals.items():
            if doc.get(f) != expected:
                return False
        for f, keys in self.contains.items():
            members = doc.get(f)
            if not isinstance(members, dict):
                return False
            if any(k not in members for k in keys):
                return False
        for f, (lo, hi) in self.ranges.items():
            v = doc.get(f)
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                return False
            if not (lo <= v <= hi):
                return False
        return True


class Subscription:
    """Handle for one observer stream; call ``unsubscribe`` to stop it."""

    def __init__(self, store: "RealtimeStore", sub_id: str, root: DocumentPath,
                 flt: Filter | None, sink: Callable[[ChangeEvent], None]):
        self.id = sub_id
        self.root = root
        self.filter = flt
        self.sink = sink
        self._store = store
        self._queue: queue.Queue = queue.Queue()
        self._matched: set[str] = set()
        self._alive = True
        self._worker = threading.Thread(
            target=self._run, name=f"sub-{sub_id}", daemon=True)

    def unsubscribe(self):
        self._store._remove_subscription(self.id)

    def _close(self):
        if self._alive:
            self._alive = False
            self._queue.put(None)

    def _run(self):
        while True:
            ev = self._queue.get()
            try:
                if ev is None or not self._alive:
                    return
                try:
                    self.sink(ev)
                except Exception:
                    log.exception("subscription %s sink failed; unsubscribing", self.id)
                    self.unsubscribe()
            finally:
                self._queue.task_done()


class _Trigger:
    def __init__(self, store, trigger_id, prefix, handler, max_attempts, name):
        self.id = trigger_id
        self.prefix = prefix
        self.handler = handler
        self.max_attempts = max_attempts
        self.name = name or trigger_id
        self._store = store
        self._queue: queue.Queue = queue.Queue()
        self._alive = True
        self._worker = threading.Thread(
            target=self._run, name=f"trigger-{self.name}", daemon=True)

    def _run(self):
        while True:
            ev = self._queue.get()
            try:
                if ev is None or not self._alive:
                    return
                self._invoke(ev)
            finally:
                self._queue.task_done()

    def _invoke(self, ev: ChangeEvent):
        for attempt in range(1, self.max_attempts + 1):
            try:
                self.handler(ev)
                return
            except Exception as exc:
                log.warning("trigger %s failed on rev %d (attempt %d/%d): %s",
                            self.name, ev.rev, attempt, self.max_attempts, exc)
                if attempt == self.max_attempts:
                    self._store._dead_letter(self, ev, exc)
                else:
                    time.sleep(0.005 * attempt)


class RealtimeStore:
    def __init__(self, data_dir: str | None = None, snapshot_every: int = 1000):
        self._tree: dict = {}
        self._rev = 0
        self._lock = threading.Lock()
        self._subs: dict[str, Subscription] = {}
        self._triggers: dict[str, _Trigger] = {}
        self._validators: list[tuple[DocumentPath, Callable]] = []
        self._id_counter = 0
        self._data_dir = data_dir
        self._snapshot_every = max(1, snapshot_every)
        self._log_file = None
        self._closed = False
        if data_dir is not None:
            os.makedirs(data_dir, exist_ok=True)
            self._recover()
            self._log_file = open(os.path.join(data_dir, "store.log"), "a", encoding="utf-8")

    # ------------------------------------------------------------------ basic ops

    def put(self, path, value) -> int:
        """Write ``value`` at ``path``, replacing any existing subtree there."""
        path = parse_path(path)
        _check_value(value)
        with self._lock:
            self._check_validators(path, value)
            existed = self._node_exists(path)
            rev = self._rev + 1
            concrete = _fill_placeholders(copy.deepcopy(value), rev)
            self._tree_set(path, concrete)
            self._rev = rev
            ev = ChangeEvent(rev=rev, path=path,
                             kind="updated" if existed else "created",
                             value=concrete)
            self._commit(ev)
        return rev

    def get(self, path):
        """Value at ``path`` or ABSENT. Returned trees are private copies."""
        path = parse_path(path)
        with self._lock:
            node = self._tree_get(path)
            if node is ABSENT:
                return ABSENT
            return copy.deepcopy(node)

    def delete(self, path) -> int:
        """Remove the subtree at ``path``. Deleting an absent path is a no-op."""
        path = parse_path(path)
        with self._lock:
            if not self._node_exists(path):
                return self._rev
            self._rev += 1
            self._tree_delete(path)
            ev = ChangeEvent(rev=self._rev, path=path, kind="deleted")
            self._commit(ev)
            return self._rev

    def current_revision(self) -> int:
        with self._lock:
            return self._rev

    def export_tree(self) -> dict:
        with self._lock:
            return copy.deepcopy(self._tree)

    def children(self, path) -> dict:
        """Direct children of a map node, or {} when absent or scalar."""
        v = self.get(path)
        return v if isinstance(v, dict) else {}

    # ------------------------------------------------------------ subscriptions

    def subscribe(self, root_path, sink, flt: Filter | None = None) -> Subscription:
        """Open a snapshot-then-delta stream of changes under ``root_path``.

        The snapshot phase delivers one synthetic ``created`` event per
        currently matching child document; afterwards every matching change
        arrives exactly once, in revision order. A sink that raises is
        unsubscribed automatically.
        """
        root = parse_path(root_path)
        with self._lock:
            self._id_counter += 1
            sub = Subscription(self, f"s{self._id_counter}", root, flt, sink)
            node = self._tree_get(root)
            if isinstance(node, dict):
                for child in sorted(node):
                    doc = node[child]
                    if flt is None or flt.matches(doc):
                        sub._matched.add(child)
                        sub._queue.put(ChangeEvent(
                            rev=self._rev, path=root + (child,), kind="created",
                            value=copy.deepcopy(doc), snapshot=True))
            elif node is not ABSENT and flt is None:
                sub._queue.put(ChangeEvent(
                    rev=self._rev, path=root, kind="created",
                    value=copy.deepcopy(node), snapshot=True))
            self._subs[sub.id] = sub
        sub._worker.start()
        return sub

    def _remove_subscription(self, sub_id: str):
        with self._lock:
            sub = self._subs.pop(sub_id, None)
        if sub is not None:
            sub._close()

    # ----------------------------------------------------------------- triggers

    def register_trigger(self, path_prefix, handler, name: str | None = None,
                         max_attempts: int = 3) -> str:
        """Invoke ``handler`` after each commit under ``path_prefix``.

        At-least-once: failures are retried up to ``max_attempts`` and then
        dead-lettered. Invocations for one trigger run serialized in revision
        order; distinct triggers run concurrently. Handlers must therefore be
        idempotent per revision.
        """
        prefix = parse_path(path_prefix)
        with self._lock:
            self._id_counter += 1
            trig = _Trigger(self, f"t{self._id_counter}", prefix, handler,
                            max_attempts, name)
            self._triggers[trig.id] = trig
        trig._worker.start()
        return trig.id

    def remove_trigger(self, trigger_id: str):
        with self._lock:
            trig = self._triggers.pop(trigger_id, None)
        if trig is not None:
            trig._alive = False
            trig._queue.put(None)

    def _dead_letter(self, trig: _Trigger, ev: ChangeEvent, exc: Exception):
        try:
            self.put(("system", "dead_letters", f"{trig.name}-r{ev.rev}"), {
                "trigger": trig.name,
                "path": path_str(ev.path),
                "rev": ev.rev,
                "error": repr(exc),
            })
        except Exception:
            log.exception("dead-letter write failed for trigger %s", trig.name)

    # --------------------------------------------------------------- validators

    def register_validator(self, path_prefix, validator: Callable):
        """``validator(path, value) -> list of violations`` for writes under
        the prefix; any violation rejects the put."""
        self._validators.append((parse_path(path_prefix), validator))

    def _check_validators(self, path: DocumentPath, value):
        for prefix, fn in self._validators:
            if _is_prefix(prefix, path):
                violations = fn(path, value)
                if violations:
                    raise ValidationRejected(list(violations))

    # ------------------------------------------------------------------ commit

    def _commit(self, ev: ChangeEvent):
        # Called under the store lock: append to the log, then route to
        # observer queues. Only queue puts happen here, never user code.
        if self._log_file is not None:
            self._log_file.write(json.dumps(ev.to_record(), separators=(",", ":")) + "\n")
            self._log_file.flush()
            if ev.rev % self._snapshot_every == 0:
                self._write_snapshot_locked()
        for sub in list(self._subs.values()):
            routed = self._route_to_subscription(sub, ev)
            if routed is not None:
                sub._queue.put(routed)
        for trig in self._triggers.values():
            if _is_prefix(trig.prefix, ev.path):
                trig._queue.put(ev)

    def _route_to_subscription(self, sub: Subscription, ev: ChangeEvent) -> ChangeEvent | None:
        if sub.filter is None:
            # Deliver descendants and also ancestor writes, which rewrite the
            # whole observed subtree.
            if _is_prefix(sub.root, ev.path) or _is_prefix(ev.path, sub.root):
                return ev
            return None
        if len(ev.path) <= len(sub.root) or not _is_prefix(sub.root, ev.path):
            return None
        entity = ev.path[len(sub.root)]
        doc = self._tree_get(sub.root + (entity,))
        now_matches = doc is not ABSENT and sub.filter.matches(doc)
        if now_matches:
            sub._matched.add(entity)
            return ev
        if entity in sub._matched:
            sub._matched.discard(entity)
            return ev
        return None

    # ------------------------------------------------------------- tree helpers

    def _node_exists(self, path: DocumentPath) -> bool:
        return self._tree_get(path) is not ABSENT

    def _tree_get(self, path: DocumentPath):
        node = self._tree
        for seg in path:
            if not isinstance(node, dict) or seg not in node:
                return ABSENT
            node = node[seg]
        return node

    def _tree_set(self, path: DocumentPath, value):
        node = self._tree
        for seg in path[:-1]:
            child = node.get(seg)
            if not isinstance(child, dict):
                child = {}
                node[seg] = child
            node = child
        node[path[-1]] = value

    def _tree_delete(self, path: DocumentPath):
        parents = []
        node = self._tree
        for seg in path[:-1]:
            parents.append((node, seg))
            node = node[seg]
        del node[path[-1]]
        # collapse maps emptied by the delete; the tree never holds {}
        while parents and not node:
            parent, seg = parents.pop()
            del parent[seg]
            node = parent

    # -------------------------------------------------------------- persistence

    def _snapshot_path(self, rev: int) -> str:
        return os.path.join(self._data_dir, f"store.snapshot.{rev}.json")

    def _write_snapshot_locked(self):
        tmp = os.path.join(self._data_dir, ".snapshot.tmp")
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump({"rev": self._rev, "tree": self._tree}, f)
        os.replace(tmp, self._snapshot_path(self._rev))
        self._prune_snapshots()

    def snapshot_now(self) -> str:
        with self._lock:
            if self._data_dir is None:
                raise RuntimeError("store has no data directory")
            self._write_snapshot_locked()
            return self._snapshot_path(self._rev)

    def _prune_snapshots(self, keep: int = 2):
        revs = sorted(self._existing_snapshots())
        for rev in revs[:-keep]:
            try:
                os.remove(self._snapshot_path(rev))
            except OSError:
                pass

    def _existing_snapshots(self) -> list[int]:
        revs = []
        for name in os.listdir(self._data_dir):
            m = re.match(r"^store\.snapshot\.(\d+)\.json$", name)
            if m:
                revs.append(int(m.group(1)))
        return revs

    def _recover(self):
        snap_rev = 0
        for rev in sorted(self._existing_snapshots(), reverse=True):
            try:
                with open(self._snapshot_path(rev), encoding="utf-8") as f:
                    payload = json.load(f)
                self._tree = payload["tree"]
                snap_rev = int(payload["rev"])
                break
            except (OSError, ValueError, KeyError):
                log.warning("ignoring unreadable snapshot rev=%d", rev)
        self._rev = snap_rev
        log_path = os.path.join(self._data_dir, "store.log")
        if not os.path.exists(log_path):
            return
        with open(log_path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                try:
                    ev = ChangeEvent.from_record(json.loads(line))
                except (ValueError, KeyError):
                    # torn tail write from a crash; everything before it is good
                    log.warning("skipping malformed log line")
                    continue
                if ev.rev <= snap_rev:
                    continue
                if ev.kind == "deleted":
                    if self._node_exists(ev.path):
                        self._tree_delete(ev.path)
                else:
                    self._tree_set(ev.path, ev.value)
                self._rev = max(self._rev, ev.rev)

    # ------------------------------------------------------------------- admin

    def wait_idle(self, timeout: float = 10.0) -> bool:
        """Block until every observer queue is drained; True on success.

        Counts queued and in-flight work via Queue.unfinished_tasks, so a
        handler that enqueues follow-on writes is awaited transitively.
        """
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            with self._lock:
                pending = sum(t._queue.unfinished_tasks for t in self._triggers.values())
                pending += sum(s._queue.unfinished_tasks for s in self._subs.values())
            if pending == 0:
                return True
            time.sleep(0.002)
        return False

    def close(self):
        if self._closed:
            return
        self._closed = True
        self.wait_idle(timeout=5.0)
        with self._lock:
            subs = list(self._subs.values())
            trigs = list(self._triggers.values())
            self._subs.clear()
            self._triggers.clear()
        for sub in subs:
            sub._close()
        for trig in trigs:
            trig._alive = False
            trig._queue.put(None)
        for sub in subs:
            sub._worker.join(timeout=1.0)
        for trig in trigs:
            trig._worker.join(timeout=1.0)
        if self._log_file is not None:
            self._log_file.close()
            self._log_file = None
