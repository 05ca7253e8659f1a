"""Service configuration: JSON file, overridable per key by environment
variables named HIKESTER_<UPPER_SNAKE_KEY>."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields

ENV_PREFIX = "HIKESTER_"


@dataclass
class Config:
    host: str = "127.0.0.1"
    port: int = 8080
    data_dir: str = "./data"
    spam_threshold: float = 0.9
    spam_alpha: float = 1.0
    interest_threshold: float = 0.3
    recommender_retrain_samples: int = 100
    optimizer_retrain_tuples: int = 50
    kmeans_k: int = 8
    kmeans_seed: int = 0
    geohash_precision: int = 5
    heartbeat_seconds: float = 30.0
    trigger_max_attempts: int = 3
    snapshot_every: int = 1000
    page_limit: int = 50
    join_weight: float = 2.0
    view_weight: float = 0.5
    search_weight: float = 0.25
    decline_weight: float = -1.0
    optimizer_hidden: int = 16
    optimizer_epochs: int = 800
    optimizer_learning_rate: float = 2.0
    optimizer_seed: int = 0
    optimizer_vocab_cap: int = 64

    def action_weights(self) -> dict[str, float]:
        return {
            "join": self.join_weight,
            "view": self.view_weight,
            "search_filtered": self.search_weight,
            "decline": self.decline_weight,
        }

    @classmethod
    def load(cls, path: str | None = None, env: dict | None = None) -> "Config":
        """File values (if a path is given) overridden by environment."""
        values: dict = {}
        known = {f.name: f.type for f in fields(cls)}
        if path is not None:
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
            for key, value in data.items():
                if key not in known:
                    raise ValueError(f"unknown config key {key!r}")
                values[key] = value
        env = os.environ if env is None else env
        for f in fields(cls):
            env_key = ENV_PREFIX + f.name.upper()
            if env_key in env:
                raw = env[env_key]
                if f.type in ("int", int):
                    values[f.name] = int(raw)
                elif f.type in ("float", float):
                    values[f.name] = float(raw)
                else:
                    values[f.name] = raw
        return cls(**values)
