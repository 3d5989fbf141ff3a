"""Application configuration: defaults, TOML loading, strict key checking.

Config files are TOML. The cloning keys (sample_n, exemplar_k,
tier_threshold, weights, topics, adapter) may appear at the top level or
inside a [cloning] table; everything else lives in its named table.
Unknown keys are rejected with their dotted location.
"""

from __future__ import annotations

import dataclasses
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ENV_CONFIG = "VC_CONFIG"


class ConfigError(Exception):
    """Invalid configuration; message carries the offending location."""


@dataclass
class CloningConfig:
    sample_n: int = 1000
    exemplar_k: int = 40
    tier_threshold: float = 0.6
    conversion_weight: float = 0.8
    duration_weight: float = 0.2
    topics: list[str] = field(
        default_factory=lambda: ["price", "speed", "installation", "promotion"]
    )
    adapter: str = "mock"
    topic_call_cap: int = 40
    seed: int = 7

    def validate(self) -> None:
        if self.sample_n < 1:
            raise ConfigError("cloning.sample_n must be >= 1")
        if self.exemplar_k < 1:
            raise ConfigError("cloning.exemplar_k must be >= 1")
        if not 0.0 <= self.tier_threshold <= 1.0:
            raise ConfigError("cloning.tier_threshold must be in [0, 1]")
        if self.adapter not in ("mock", "external"):
            raise ConfigError("cloning.adapter must be 'mock' or 'external'")
        if not self.topics:
            raise ConfigError("cloning.topics must be non-empty")


@dataclass
class PlaybookConfig:
    company: str = "Siam Broadband"
    agent_display_name: str = "Arisa"
    default_primary_goal: str = (
        "Book an installation appointment for the product with every interested customer."
    )
    required_closing_phrase: str = (
        "Thank you for your time today, and have a wonderful day."
    )
    goal_verbs: list[str] = field(
        default_factory=lambda: [
            "book",
            "schedule",
            "secure",
            "close",
            "confirm",
            "obtain",
            "win",
        ]
    )
    redundancy_threshold: float = 0.8
    politeness_ratio: float = 3.0
    terminology: list[dict[str, str]] = field(
        default_factory=lambda: [
            {
                "jargon": "FUP",
                "replacement": "speed throttling after the high-speed quota is used",
            },
            {"jargon": "CRM", "replacement": "our customer records system"},
        ]
    )


@dataclass
class GatewayConfig:
    host: str = "127.0.0.1"
    port: int = 8777
    playbook_dir: str = "out"
    queue_capacity: int = 100
    default_adapter: str = "echo"
    echo_processing_delay_ms: int = 0
    slot_values: dict[str, str] = field(
        default_factory=lambda: {
            "agent_name": "Arisa",
            "agent_id": "A-100",
            "customer_plan": "standard 300 Mbps plan",
            "customer_tenure": "2019",
        }
    )


@dataclass
class EvaluationConfig:
    rubric_path: str = ""  # empty -> bundled default rubric
    delta_threshold: float = 0.5


@dataclass
class AppConfig:
    corpus_path: str = "fixtures/corpus_50.jsonl"
    output_dir: str = "out"
    cloning: CloningConfig = field(default_factory=CloningConfig)
    playbook: PlaybookConfig = field(default_factory=PlaybookConfig)
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)

    def validate(self) -> None:
        self.cloning.validate()
        if not 0.0 <= self.playbook.redundancy_threshold <= 1.0:
            raise ConfigError("playbook.redundancy_threshold must be in [0, 1]")
        if self.playbook.politeness_ratio <= 0:
            raise ConfigError("playbook.politeness_ratio must be positive")
        if self.gateway.queue_capacity < 2:
            raise ConfigError("gateway.queue_capacity must be >= 2")


# Cloning keys accepted at the top level of a flat clone config file.
_TOP_LEVEL_CLONING_KEYS = {
    "sample_n",
    "exemplar_k",
    "tier_threshold",
    "weights",
    "topics",
    "adapter",
    "topic_call_cap",
    "seed",
}


def _apply_table(target: Any, table: dict[str, Any], where: str) -> None:
    names = {f.name for f in dataclasses.fields(target)}
    for key, value in table.items():
        if where == "cloning" and key == "weights":
            if (
                not isinstance(value, list)
                or len(value) != 2
                or not all(isinstance(w, (int, float)) for w in value)
            ):
                raise ConfigError("cloning.weights must be a two-element number list")
            target.conversion_weight = float(value[0])
            target.duration_weight = float(value[1])
            continue
        if key not in names:
            raise ConfigError(f"unknown config key '{where}.{key}'" if where else f"unknown config key '{key}'")
        current = getattr(target, key)
        if isinstance(current, float) and isinstance(value, int):
            value = float(value)
        if current is not None and not isinstance(value, type(current)):
            raise ConfigError(f"config key '{where + '.' if where else ''}{key}' has wrong type")
        setattr(target, key, value)


def load_config(path: str | Path | None = None) -> AppConfig:
    """Build an AppConfig from defaults plus an optional TOML file.

    With no explicit path, falls back to $VC_CONFIG if set, else defaults.
    """
    config = AppConfig()
    if path is None:
        env_path = os.environ.get(ENV_CONFIG, "")
        if env_path:
            path = env_path
    if path is None:
        config.validate()
        return config

    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc

    tables = {
        "cloning": config.cloning,
        "playbook": config.playbook,
        "gateway": config.gateway,
        "evaluation": config.evaluation,
    }
    for key, value in data.items():
        if key in tables:
            if not isinstance(value, dict):
                raise ConfigError(f"config key '{key}' must be a table")
            _apply_table(tables[key], value, key)
        elif key == "corpus":
            if not isinstance(value, dict):
                raise ConfigError("config key 'corpus' must be a table")
            for ck, cv in value.items():
                if ck != "path":
                    raise ConfigError(f"unknown config key 'corpus.{ck}'")
                config.corpus_path = str(cv)
        elif key == "output":
            if not isinstance(value, dict):
                raise ConfigError("config key 'output' must be a table")
            for ok, ov in value.items():
                if ok != "dir":
                    raise ConfigError(f"unknown config key 'output.{ok}'")
                config.output_dir = str(ov)
        elif key in _TOP_LEVEL_CLONING_KEYS:
            _apply_table(config.cloning, {key: value}, "cloning")
        else:
            raise ConfigError(f"unknown config key '{key}'")
    config.validate()
    return config
