import concurrent.futures

import pytest

from hikester.config import Config
from hikester.service import Platform


@pytest.fixture
def platform(tmp_path):
    cfg = Config(data_dir=str(tmp_path / "data"), heartbeat_seconds=0.2)
    p = Platform(cfg)
    yield p
    p.close()


def make_platform(tmp_path, **overrides) -> Platform:
    values = {"data_dir": str(tmp_path), "heartbeat_seconds": 0.2}
    values.update(overrides)
    return Platform(Config(**values))


def event_body(creator, title="Football match", tags=("football",), hour=18,
               start_date="2026-08-15", lat=55.75, lon=48.74, description="a game"):
    return {
        "title": title,
        "description": description,
        "tags": list(tags),
        "start_hour": hour,
        "start_date": start_date,
        "location": {"lat": lat, "lon": lon},
        "creator": creator,
    }


def recv_json(ws, timeout=5.0):
    """receive_json with a timeout so a missing message fails, not hangs."""
    with concurrent.futures.ThreadPoolExecutor(max_workers=1) as pool:
        fut = pool.submit(ws.receive_json)
        return fut.result(timeout=timeout)


def recv_until(ws, predicate, timeout=5.0, limit=200):
    """Drain messages until one satisfies the predicate; returns (msg, skipped)."""
    skipped = []
    for _ in range(limit):
        msg = recv_json(ws, timeout=timeout)
        if predicate(msg):
            return msg, skipped
        skipped.append(msg)
    raise AssertionError(f"no matching message in {limit} frames")
