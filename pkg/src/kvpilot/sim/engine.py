"""Discrete-event engine for the disaggregated-serving scenarios.

Each request runs five stages: prefill, compress, communicate,
decompress, decode. The communicate stage integrates the bandwidth
trace; codec stages follow the profile throughputs, optionally skewed
by a drift model so that the controller's predictions go stale.

Two scenario kinds share the engine. ``pd_separation`` transfers the
KV state between a prefill node and a decode node, so job completion
covers all five stages. ``prefix_caching`` fetches a previously stored
blob instead of running prefill, so time to first token is the fetch
path (communicate plus decompress) and the engine may fall back to
recomputing the prefix whenever that is faster.

Controller modes:

- ``full``: envelope lookup, residual-corrected selection, outcome
  feedback after every request.
- ``no_bandit``: same analytic selection with exploration disabled and
  no outcome feedback.
- ``no_controller``: one selection at the trace-start bandwidth, reused
  for every request.
- ``fixed_profile``: a named profile for every request.
- ``no_compression``: raw transfer for every request.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from kvpilot.control.bandit import BanditParams, BanditState, select_profile, observe_outcome
from kvpilot.control.envelope import PolicyTable, build_policy_table
from kvpilot.control.latency import NO_COMPRESSION, Profile, ServiceContext, predict_latency
from kvpilot.sim.trace import GBPS_TO_BYTES_PER_S, BandwidthTrace, bandwidth_at, transfer_seconds
from kvpilot.sim.workload import Request

MODES = ("full", "no_bandit", "no_controller", "fixed_profile", "no_compression")
KINDS = ("pd_separation", "prefix_caching")

STAGE_NAMES = ("prefill", "compress", "communicate", "decompress", "decode")

# (time_s, value) steps, right-continuous, applied by profile id.
Schedule = tuple[tuple[float, float], ...]


def _step_value(schedule: Schedule, t: float, default: float) -> float:
    if not schedule:
        return default
    times = [entry[0] for entry in schedule]
    idx = bisect_right(times, t) - 1
    if idx < 0:
        return default
    return schedule[idx][1]


@dataclass(frozen=True)
class DriftModel:
    """Time-varying perturbation of profile codec behaviour.

    ``factors`` multiplies a profile's encode and decode throughput;
    ``overheads`` adds fixed seconds split evenly across the compress
    and decompress stages. Keys are profile ids, with ``"*"`` as a
    wildcard consulted when no exact entry exists. Profiles that do no
    codec work are never perturbed.
    """

    factors: dict[str, Schedule] = field(default_factory=dict)
    overheads: dict[str, Schedule] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, table in (("factors", self.factors), ("overheads", self.overheads)):
            for profile_id, schedule in table.items():
                times = [entry[0] for entry in schedule]
                if times != sorted(times) or len(set(times)) != len(times):
                    raise ValueError(f"{name}[{profile_id!r}]: times must be strictly increasing")
                for _, value in schedule:
                    bad = value <= 0.0 if name == "factors" else value < 0.0
                    if bad:
                        raise ValueError(f"{name}[{profile_id!r}]: invalid value {value!r}")

    def _schedule(self, table: dict[str, Schedule], profile_id: str) -> Schedule:
        if profile_id in table:
            return table[profile_id]
        return table.get("*", ())

    def factor(self, profile_id: str, t: float) -> float:
        return _step_value(self._schedule(self.factors, profile_id), t, 1.0)

    def overhead(self, profile_id: str, t: float) -> float:
        return _step_value(self._schedule(self.overheads, profile_id), t, 0.0)


@dataclass(frozen=True)
class StageTimes:
    prefill: float
    compress: float
    communicate: float
    decompress: float
    decode: float

    @property
    def total(self) -> float:
        return self.prefill + self.compress + self.communicate + self.decompress + self.decode

    def as_dict(self) -> dict[str, float]:
        return {
            "prefill": self.prefill,
            "compress": self.compress,
            "communicate": self.communicate,
            "decompress": self.decompress,
            "decode": self.decode,
        }


def _does_codec_work(profile: Profile) -> bool:
    return not math.isinf(profile.s)


def simulate_request(
    request: Request,
    profile: Profile,
    trace: BandwidthTrace,
    drift: DriftModel | None = None,
    kind: str = "pd_separation",
    recompute_seconds: float | None = None,
) -> tuple[StageTimes, bool]:
    """Realize one request under ``profile`` and return (stages, recomputed).

    Drift factors and overheads are sampled at the request arrival time.
    For ``prefix_caching`` the fetch path competes against recomputing
    the prefix (``recompute_seconds``, defaulting to the request's
    prefill time); the cheaper option is booked and the flag reports
    which one won.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown scenario kind {kind!r}")
    drift = drift or DriftModel()
    volume = request.volume
    if _does_codec_work(profile):
        factor = drift.factor(profile.id, request.arrival)
        overhead = drift.overhead(profile.id, request.arrival)
        compress = volume / (profile.s_enc * factor) + overhead / 2.0
        decompress = volume / (profile.s_dec * factor) + overhead / 2.0
        payload = volume / profile.cr
    else:
        compress = 0.0
        decompress = 0.0
        payload = volume

    if kind == "pd_separation":
        prefill = request.t_prefill
        communicate = transfer_seconds(trace, request.arrival + prefill + compress, payload)
        return StageTimes(prefill, compress, communicate, decompress, request.t_decode), False

    # Prefix hit: the blob was stored compressed, so the compress stage
    # is not on the critical path and its overhead share is not charged.
    communicate = transfer_seconds(trace, request.arrival, payload)
    fetch = StageTimes(0.0, 0.0, communicate, decompress, request.t_decode)
    recompute = request.t_prefill if recompute_seconds is None else recompute_seconds
    fetch_ttft = fetch.total - fetch.decode
    if recompute < fetch_ttft:
        return StageTimes(recompute, 0.0, 0.0, 0.0, request.t_decode), True
    return fetch, False


@dataclass(frozen=True)
class Scenario:
    """One simulator run: requests, link trace, policy assets, mode."""

    requests: tuple[Request, ...]
    trace: BandwidthTrace
    profiles: tuple[Profile, ...]
    kind: str = "pd_separation"
    mode: str = "full"
    drift: DriftModel = field(default_factory=DriftModel)
    bandit_params: BanditParams = field(default_factory=BanditParams)
    fixed_profile_id: str | None = None
    recompute_seconds: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.requests:
            raise ValueError("scenario needs at least one request")
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown controller mode {self.mode!r}")
        if self.mode == "fixed_profile" and self.fixed_profile_id is None:
            raise ValueError("fixed_profile mode requires fixed_profile_id")
        if self.mode != "no_compression" and not self.profiles:
            raise ValueError("scenario needs at least one profile")


@dataclass(frozen=True)
class RequestRecord:
    """Realized outcome of one request."""

    request_id: str
    workload: str
    arrival: float
    profile_id: str
    reason: str
    explored: bool
    recomputed: bool
    predicted: float | None
    stages: StageTimes
    ttft: float
    jct: float
    t_slo: float
    violated: bool


@dataclass(frozen=True)
class PolicyAssets:
    """Controller state shared across the requests of one run."""

    table: PolicyTable | None
    bandit: BanditState | None


@dataclass(frozen=True)
class SimMetrics:
    """Aggregate view over the per-request records of one run."""

    records: tuple[RequestRecord, ...]
    mean_jct: float
    p50_jct: float
    p99_jct: float
    mean_ttft: float
    violation_rate: float
    stage_shares: dict[str, float]

    @classmethod
    def from_records(cls, records: tuple[RequestRecord, ...]) -> SimMetrics:
        if not records:
            raise ValueError("no records to aggregate")
        jcts = np.array([r.jct for r in records], dtype=np.float64)
        ttfts = np.array([r.ttft for r in records], dtype=np.float64)
        shares = {name: 0.0 for name in STAGE_NAMES}
        for r in records:
            total = r.stages.total
            if total > 0.0:
                for name, value in r.stages.as_dict().items():
                    shares[name] += value / total
        shares = {name: value / len(records) for name, value in shares.items()}
        return cls(
            records=records,
            mean_jct=float(jcts.mean()),
            p50_jct=float(np.percentile(jcts, 50)),
            p99_jct=float(np.percentile(jcts, 99)),
            mean_ttft=float(ttfts.mean()),
            violation_rate=float(np.mean([r.violated for r in records])),
            stage_shares=shares,
        )


def report_breakdown(metrics: SimMetrics) -> dict[str, float]:
    """Mean per-request stage shares as percentages summing to 100."""
    return {name: 100.0 * share for name, share in metrics.stage_shares.items()}


def _static_profile(scenario: Scenario, table: PolicyTable | None) -> Profile:
    if scenario.mode == "no_compression":
        return NO_COMPRESSION
    if scenario.mode == "fixed_profile":
        for profile in scenario.profiles:
            if profile.id == scenario.fixed_profile_id:
                return profile
        raise ValueError(f"fixed_profile_id {scenario.fixed_profile_id!r} not in profiles")
    # One-shot selection at the trace-start bandwidth, then frozen.
    assert table is not None
    first = min(scenario.requests, key=lambda r: r.arrival)
    c = _context_for(first, scenario, bandwidth_gbps=scenario.trace.rates[0])
    throwaway = BanditState(params=BanditParams(epsilon=0.0))
    profile, _ = select_profile(c, table, throwaway, all_profiles=scenario.profiles)
    return profile


def _context_for(request: Request, scenario: Scenario, bandwidth_gbps: float) -> ServiceContext:
    # On a prefix hit the prefill stage never runs, so the static model
    # time the controller reasons about is the decode side only.
    if scenario.kind == "prefix_caching":
        t_model = request.t_decode
    else:
        t_model = request.t_prefill + request.t_decode
    return ServiceContext(
        workload=request.workload,
        bandwidth=bandwidth_gbps * GBPS_TO_BYTES_PER_S,
        t_slo=request.t_slo,
        q_min=request.q_min,
        volume=request.volume,
        t_model=t_model,
    )


def run_scenario(scenario: Scenario, table: PolicyTable | None = None) -> tuple[SimMetrics, PolicyAssets]:
    """Run every request through the configured controller mode.

    Requests are processed in arrival order. The policy table is built
    from the scenario profiles unless one is supplied. Returns the
    aggregated metrics plus the controller assets so callers can inspect
    learned residuals or resume a run.
    """
    needs_table = scenario.mode in ("full", "no_bandit", "no_controller")
    if needs_table and table is None:
        table = build_policy_table(scenario.profiles)

    bandit: BanditState | None = None
    if scenario.mode == "full":
        bandit = BanditState(params=scenario.bandit_params)
    elif scenario.mode == "no_bandit":
        params = scenario.bandit_params
        bandit = BanditState(
            params=BanditParams(
                alpha=params.alpha,
                epsilon=0.0,
                violation_limit=params.violation_limit,
                window=params.window,
                cooldown=params.cooldown,
            )
        )

    static: Profile | None = None
    if scenario.mode in ("no_controller", "fixed_profile", "no_compression"):
        static = _static_profile(scenario, table)

    rng = np.random.default_rng(scenario.seed)
    records: list[RequestRecord] = []
    for request in sorted(scenario.requests, key=lambda r: (r.arrival, r.id)):
        decision = None
        if static is not None:
            profile = static
            reason = "static"
            explored = False
            predicted: float | None = None
        else:
            assert table is not None and bandit is not None
            c = _context_for(request, scenario, bandwidth_at(scenario.trace, request.arrival))
            profile, decision = select_profile(
                c,
                table,
                bandit,
                all_profiles=scenario.profiles,
                rng=rng,
                request_id=request.id,
            )
            reason = decision.reason
            explored = decision.explored
            predicted = decision.predicted
        stages, recomputed = simulate_request(
            request,
            profile,
            scenario.trace,
            scenario.drift,
            kind=scenario.kind,
            recompute_seconds=scenario.recompute_seconds,
        )
        jct = stages.total
        ttft = jct - stages.decode
        violated = jct > request.t_slo
        if scenario.mode == "full" and decision is not None and not recomputed:
            observe_outcome(decision, jct, bandit)
        records.append(
            RequestRecord(
                request_id=request.id,
                workload=request.workload,
                arrival=request.arrival,
                profile_id=profile.id,
                reason=reason,
                explored=explored,
                recomputed=recomputed,
                predicted=predicted,
                stages=stages,
                ttft=ttft,
                jct=jct,
                t_slo=request.t_slo,
                violated=violated,
            )
        )
    metrics = SimMetrics.from_records(tuple(records))
    return metrics, PolicyAssets(table=table, bandit=bandit)
