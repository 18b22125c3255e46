"""Configuration, persistence, and reporting for reproducible runs."""

from __future__ import annotations

from kvpilot.io.config import (
    ConfigError,
    CorpusConfig,
    EnvelopeConfig,
    RequestsConfig,
    RunConfig,
    ScenarioConfig,
    config_digest,
    parse_config,
    serialize_config,
)
from kvpilot.io.report import emit_report
from kvpilot.io.store import (
    STORE_VERSION,
    ProfileStore,
    StoreError,
    load_profiles,
    parse_store,
    serialize_store,
    store_profiles,
)

__all__ = [
    "ConfigError",
    "CorpusConfig",
    "EnvelopeConfig",
    "ProfileStore",
    "RequestsConfig",
    "RunConfig",
    "STORE_VERSION",
    "ScenarioConfig",
    "StoreError",
    "config_digest",
    "emit_report",
    "load_profiles",
    "parse_config",
    "parse_store",
    "serialize_config",
    "serialize_store",
    "store_profiles",
]
