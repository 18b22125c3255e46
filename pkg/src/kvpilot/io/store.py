"""Versioned profile store: the offline-to-online handoff document.

The store is a JSON file holding the profiled strategies with their
measured (cr, s_enc, s_dec, q) numbers, the workload label they were
profiled for, and a digest of the search trace that produced them. It is
the static lookup table the online controller loads. Floats are written
in shortest round-trip form, so save then load is bit-exact.
"""

from __future__ import annotations

import fcntl
import json
import os
from dataclasses import dataclass

from kvpilot.control.latency import Profile

STORE_VERSION = 1

# Default store location when the CLI gets no --store flag.
STORE_PATH_ENV = "KVPILOT_STORE"

_PROFILE_KEYS = ("id", "strategy_id", "cr", "s", "s_enc", "s_dec", "q")


class StoreError(ValueError):
    """Raised for unreadable, corrupt, or inconsistent store files."""


@dataclass(frozen=True)
class ProfileStore:
    """Profiled strategies plus the provenance needed to reproduce them."""

    profiles: tuple[Profile, ...]
    workload: str = "default"
    trace_digest: str = ""
    config_digest: str = ""
    seed: int = 0
    version: int = STORE_VERSION

    def __post_init__(self) -> None:
        if self.version != STORE_VERSION:
            raise StoreError(f"store version must be {STORE_VERSION}, got {self.version}")
        ids = [p.id for p in self.profiles]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise StoreError(f"duplicate profile id(s): {dup}")

    def profile(self, profile_id: str) -> Profile:
        for p in self.profiles:
            if p.id == profile_id:
                return p
        raise StoreError(f"no profile with id {profile_id!r}")


def serialize_store(store: ProfileStore) -> str:
    # Infinite throughput (the no-compression sentinel) is stored as the
    # string "inf" since JSON has no infinity literal.
    def num(value: float):
        return "inf" if value == float("inf") else value

    doc = {
        "version": store.version,
        "workload": store.workload,
        "trace_digest": store.trace_digest,
        "config_digest": store.config_digest,
        "seed": store.seed,
        "profiles": [
            {
                "id": p.id,
                "strategy_id": p.strategy_id,
                "cr": num(p.cr),
                "s": num(p.s),
                "s_enc": num(p.s_enc),
                "s_dec": num(p.s_dec),
                "q": num(p.q),
            }
            for p in store.profiles
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _num(value, where: str) -> float:
    if value == "inf":
        return float("inf")
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    raise StoreError(f"{where}: expected a number or 'inf', got {value!r}")


def parse_store(text: str) -> ProfileStore:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StoreError(f"corrupt store: {exc.msg} at byte offset {exc.pos}") from None
    if not isinstance(data, dict):
        raise StoreError("store root must be an object")
    unknown = sorted(set(data) - {"version", "workload", "trace_digest", "config_digest", "seed", "profiles"})
    if unknown:
        raise StoreError(f"unknown key(s) {unknown} in store")
    if "version" not in data:
        raise StoreError("store is missing the version field")
    profiles = []
    for i, row in enumerate(data.get("profiles", [])):
        where = f"profiles[{i}]"
        extra = sorted(set(row) - set(_PROFILE_KEYS))
        if extra:
            raise StoreError(f"unknown key(s) {extra} in {where}")
        try:
            profiles.append(
                Profile(
                    id=str(row["id"]),
                    cr=_num(row["cr"], where),
                    s=_num(row["s"], where),
                    q=_num(row["q"], where),
                    s_enc=_num(row["s_enc"], where),
                    s_dec=_num(row["s_dec"], where),
                    strategy_id=row.get("strategy_id"),
                )
            )
        except KeyError as exc:
            raise StoreError(f"{where}: missing field {exc.args[0]!r}") from None
        except ValueError as exc:
            raise StoreError(f"{where}: {exc}") from None
    return ProfileStore(
        profiles=tuple(profiles),
        workload=str(data.get("workload", "default")),
        trace_digest=str(data.get("trace_digest", "")),
        config_digest=str(data.get("config_digest", "")),
        seed=int(data.get("seed", 0)),
        version=int(data["version"]),
    )


def store_profiles(store: ProfileStore, path: str) -> None:
    """Write the store under an advisory exclusive lock."""
    text = serialize_store(store)
    fd = os.open(path, os.O_RDWR | os.O_CREAT, 0o644)
    try:
        fcntl.flock(fd, fcntl.LOCK_EX)
        os.ftruncate(fd, 0)
        os.write(fd, text.encode("utf-8"))
    finally:
        fcntl.flock(fd, fcntl.LOCK_UN)
        os.close(fd)


def load_profiles(path: str) -> ProfileStore:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise StoreError(f"cannot read store {path!r}: {exc}") from None
    return parse_store(text)
