"""Run configuration: strict parsing, validation, canonical serialization.

Configs are JSON documents with a fixed section layout. Parsing is
strict, so unknown keys raise instead of being ignored, every cross-field
precondition of the downstream modules is checked up front, and defaults
are materialized so that serializing the parsed config echoes the full
effective settings. parse(serialize(parse(text))) is a fixpoint.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, fields

from kvpilot.control.bandit import BanditParams
from kvpilot.control.envelope import DEFAULT_BUCKET_FLOORS
from kvpilot.profiling.search import SearchBudget
from kvpilot.profiling.space import SpaceDef
from kvpilot.sim.engine import KINDS, MODES
from kvpilot.sim.trace import GBPS_TO_BYTES_PER_S
from kvpilot.sim.workload import WorkloadSpec

CONFIG_VERSION = 1


class ConfigError(ValueError):
    """Raised for schema violations, unknown keys, or bad field values."""


@dataclass(frozen=True)
class CorpusConfig:
    """Synthetic KV corpus shape and sampling used during profiling."""

    count: int = 16
    layers: int = 4
    heads: int = 8
    tokens: int = 64
    channels: int = 64
    outlier_fraction: float = 0.01
    outlier_scale: float = 10.0
    seed: int = 0
    sample_size: int = 8

    def __post_init__(self) -> None:
        for name in ("count", "layers", "heads", "tokens", "channels", "sample_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"corpus.{name} must be >= 1")
        if not 0.0 <= self.outlier_fraction <= 1.0:
            raise ConfigError("corpus.outlier_fraction must be in [0, 1]")
        if self.outlier_scale <= 0.0:
            raise ConfigError("corpus.outlier_scale must be positive")
        if self.sample_size > self.count:
            raise ConfigError("corpus.sample_size cannot exceed corpus.count")


@dataclass(frozen=True)
class EnvelopeConfig:
    """Quality buckets plus the bandwidth range the policy table covers."""

    bucket_floors: tuple[float, ...] = DEFAULT_BUCKET_FLOORS
    bandwidth_lo_gbps: float = 0.08
    bandwidth_hi_gbps: float = 800.0

    def __post_init__(self) -> None:
        if not self.bucket_floors:
            raise ConfigError("envelope.bucket_floors must be nonempty")
        for floor in self.bucket_floors:
            if not 0.0 < floor <= 1.0:
                raise ConfigError(f"envelope.bucket_floors entries must be in (0, 1], got {floor}")
        if len(set(self.bucket_floors)) != len(self.bucket_floors):
            raise ConfigError("envelope.bucket_floors must be distinct")
        if not 0.0 < self.bandwidth_lo_gbps < self.bandwidth_hi_gbps:
            raise ConfigError("envelope bandwidth bounds need 0 < lo < hi")

    @property
    def x_lo(self) -> float:
        return 1.0 / (self.bandwidth_hi_gbps * GBPS_TO_BYTES_PER_S)

    @property
    def x_hi(self) -> float:
        return 1.0 / (self.bandwidth_lo_gbps * GBPS_TO_BYTES_PER_S)


@dataclass(frozen=True)
class RequestsConfig:
    """Request-stream generation parameters for one scenario."""

    count: int = 100
    mean_interarrival: float = 1.0
    start: float = 0.0
    workloads: tuple[dict, ...] = (
        {
            "name": "default",
            "weight": 1.0,
            "mean_volume": float(2**30),
            "volume_sigma": 0.25,
            "t_prefill": 0.5,
            "t_decode": 1.0,
            "t_slo": 20.0,
            "q_min": 0.90,
        },
    )

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ConfigError("requests.count must be >= 1")
        if self.mean_interarrival <= 0.0:
            raise ConfigError("requests.mean_interarrival must be positive")
        if not self.workloads:
            raise ConfigError("requests.workloads must be nonempty")
        allowed = {f.name for f in fields(WorkloadSpec)}
        for entry in self.workloads:
            unknown = sorted(set(entry) - allowed)
            if unknown:
                raise ConfigError(f"unknown key(s) {unknown} in requests.workloads entry")
            if "name" not in entry:
                raise ConfigError("requests.workloads entries need a 'name'")

    def specs(self) -> tuple[WorkloadSpec, ...]:
        return tuple(WorkloadSpec(**entry) for entry in self.workloads)


@dataclass(frozen=True)
class ScenarioConfig:
    """One named simulator scenario: kind, mode, trace, drift, requests."""

    kind: str = "pd_separation"
    mode: str = "full"
    trace: tuple[tuple[float, float], ...] = ((0.0, 1.0),)
    requests: RequestsConfig = field(default_factory=RequestsConfig)
    drift_factors: dict[str, tuple[tuple[float, float], ...]] = field(default_factory=dict)
    drift_overheads: dict[str, tuple[tuple[float, float], ...]] = field(default_factory=dict)
    fixed_profile_id: str | None = None
    recompute_seconds: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"scenario.kind must be one of {KINDS}, got {self.kind!r}")
        if self.mode not in MODES:
            raise ConfigError(f"scenario.mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "fixed_profile" and not self.fixed_profile_id:
            raise ConfigError("scenario.mode 'fixed_profile' requires fixed_profile_id")
        if not self.trace:
            raise ConfigError("scenario.trace must be nonempty")
        if self.recompute_seconds is not None and self.recompute_seconds < 0.0:
            raise ConfigError("scenario.recompute_seconds must be non-negative")


@dataclass(frozen=True)
class RunConfig:
    """Validated settings for a full profile/envelope/simulate run."""

    version: int = CONFIG_VERSION
    workload: str = "default"
    space: SpaceDef = field(default_factory=SpaceDef)
    budget: SearchBudget = field(default_factory=SearchBudget)
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    envelope: EnvelopeConfig = field(default_factory=EnvelopeConfig)
    bandit: BanditParams = field(default_factory=BanditParams)
    scenarios: dict[str, ScenarioConfig] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.version != CONFIG_VERSION:
            raise ConfigError(f"config version must be {CONFIG_VERSION}, got {self.version}")
        for group in self.space.group_sizes:
            if self.corpus.channels % group != 0:
                raise ConfigError(
                    f"space.group_sizes entry {group} does not divide corpus.channels {self.corpus.channels}"
                )
        if "hadamard_over_channels" in self.space.transforms:
            n = self.corpus.channels
            if n & (n - 1) != 0:
                raise ConfigError(
                    f"transform 'hadamard_over_channels' requires power-of-two corpus.channels, got {n}"
                )


_SECTION_KEYS = ("version", "workload", "space", "budget", "corpus", "envelope", "bandit", "scenarios")


def _check_keys(data: dict, allowed: tuple[str, ...], where: str) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {where}")


def _dataclass_from(data: dict, cls, where: str, tuple_fields: tuple[str, ...] = ()):
    names = tuple(f.name for f in fields(cls))
    _check_keys(data, names, where)
    kwargs = dict(data)
    for name in tuple_fields:
        if name in kwargs:
            kwargs[name] = tuple(kwargs[name])
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _parse_schedule_map(data: dict, where: str) -> dict[str, tuple[tuple[float, float], ...]]:
    out: dict[str, tuple[tuple[float, float], ...]] = {}
    for profile_id, entries in data.items():
        steps = []
        for entry in entries:
            if len(entry) != 2:
                raise ConfigError(f"{where}[{profile_id!r}]: entries must be [time, value] pairs")
            steps.append((float(entry[0]), float(entry[1])))
        out[profile_id] = tuple(steps)
    return out


def _parse_scenario(data: dict, where: str) -> ScenarioConfig:
    names = tuple(f.name for f in fields(ScenarioConfig))
    _check_keys(data, names, where)
    kwargs = dict(data)
    if "trace" in kwargs:
        steps = []
        for entry in kwargs["trace"]:
            if len(entry) != 2:
                raise ConfigError(f"{where}.trace: entries must be [time, rate] pairs")
            steps.append((float(entry[0]), float(entry[1])))
        kwargs["trace"] = tuple(steps)
    if "requests" in kwargs:
        req = dict(kwargs["requests"])
        _check_keys(req, tuple(f.name for f in fields(RequestsConfig)), f"{where}.requests")
        if "workloads" in req:
            req["workloads"] = tuple(dict(w) for w in req["workloads"])
        kwargs["requests"] = _dataclass_from(req, RequestsConfig, f"{where}.requests")
    if "drift_factors" in kwargs:
        kwargs["drift_factors"] = _parse_schedule_map(kwargs["drift_factors"], f"{where}.drift_factors")
    if "drift_overheads" in kwargs:
        kwargs["drift_overheads"] = _parse_schedule_map(kwargs["drift_overheads"], f"{where}.drift_overheads")
    try:
        return ScenarioConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run config (strict schema)."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    _check_keys(data, _SECTION_KEYS, "config root")

    space = _dataclass_from(
        dict(data.get("space", {})),
        SpaceDef,
        "space",
        tuple_fields=("transforms", "quant_kinds", "bits", "group_sizes", "high_bits", "low_bits", "retrieval_fractions", "codecs"),
    )
    budget = _dataclass_from(dict(data.get("budget", {})), SearchBudget, "budget")
    corpus = _dataclass_from(dict(data.get("corpus", {})), CorpusConfig, "corpus")
    envelope = _dataclass_from(
        dict(data.get("envelope", {})), EnvelopeConfig, "envelope", tuple_fields=("bucket_floors",)
    )
    bandit = _dataclass_from(dict(data.get("bandit", {})), BanditParams, "bandit")
    scenarios = {
        name: _parse_scenario(dict(spec), f"scenarios.{name}")
        for name, spec in dict(data.get("scenarios", {})).items()
    }
    return RunConfig(
        version=int(data.get("version", CONFIG_VERSION)),
        workload=str(data.get("workload", "default")),
        space=space,
        budget=budget,
        corpus=corpus,
        envelope=envelope,
        bandit=bandit,
        scenarios=scenarios,
    )


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError("config cannot serialize non-finite numbers")
    return value


def serialize_config(config: RunConfig) -> str:
    """Render the config with every default materialized (echo form)."""
    doc = {
        "version": config.version,
        "workload": config.workload,
        "space": {f.name: _plain(getattr(config.space, f.name)) for f in fields(SpaceDef)},
        "budget": {f.name: getattr(config.budget, f.name) for f in fields(SearchBudget)},
        "corpus": {f.name: getattr(config.corpus, f.name) for f in fields(CorpusConfig)},
        "envelope": {f.name: _plain(getattr(config.envelope, f.name)) for f in fields(EnvelopeConfig)},
        "bandit": {f.name: getattr(config.bandit, f.name) for f in fields(BanditParams)},
        "scenarios": {
            name: {
                "kind": sc.kind,
                "mode": sc.mode,
                "trace": _plain(sc.trace),
                "requests": {f.name: _plain(getattr(sc.requests, f.name)) for f in fields(RequestsConfig)},
                "drift_factors": _plain(sc.drift_factors),
                "drift_overheads": _plain(sc.drift_overheads),
                "fixed_profile_id": sc.fixed_profile_id,
                "recompute_seconds": sc.recompute_seconds,
            }
            for name, sc in sorted(config.scenarios.items())
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def config_digest(config: RunConfig) -> str:
    """Stable hex digest of the echoed config, embedded in artifacts."""
    canonical = json.dumps(json.loads(serialize_config(config)), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
