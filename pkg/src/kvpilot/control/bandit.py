"""Residual-corrected epsilon-greedy profile selection with SLO guardrails.

Each (bucket, interval) pair is an independent bandit environment over at
most three candidate profiles. Per arm we keep an EWMA of the residual
delta = T_obs - T_hat (the gap between observed and analytically predicted
latency), a usage count, and a ring buffer of recent SLO outcomes; K
violations within the last M uses put the arm in cooldown.

Selection: take the envelope candidates, drop cooled-down arms, drop
non-beneficial profiles (bandwidth at or above the benefit threshold,
rescued by no-compression if that empties the set), apply the conservative
feasibility filter T_hat <= T_SLO (falling back to the highest-quality
feasible profile when empty), then exploit the minimum corrected latency
T_eff = T_hat + delta_bar with probability 1 - epsilon and explore
uniformly among the other feasible candidates otherwise.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from kvpilot.control.envelope import PolicyTable, QualityError, lookup
from kvpilot.control.latency import NO_COMPRESSION, Profile, ServiceContext, benefit_threshold, predict_latency

SELECT_REASONS = ("exploit", "explore", "benefit_rescue", "slo_fallback", "quality_fallback")


@dataclass(frozen=True)
class BanditParams:
    alpha: float = 0.2  # EWMA tracking rate
    epsilon: float = 0.1  # exploration probability
    violation_limit: int = 3  # K
    window: int = 10  # M
    cooldown: int = 50  # selections an offending arm sits out

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError(f"epsilon must be in [0, 1), got {self.epsilon}")
        if self.violation_limit < 1 or self.window < 1 or self.cooldown < 0:
            raise ValueError("violation_limit and window must be >= 1, cooldown >= 0")


@dataclass
class _ArmState:
    delta_bar: float = 0.0
    count: int = 0
    outcomes: deque = field(default_factory=deque)  # maxlen set on creation
    cooldown_until: int = 0


EnvKey = tuple[float, int]  # (bucket floor, interval index)


@dataclass
class BanditState:
    """All environments plus a selection clock used for cooldown timing."""

    params: BanditParams = field(default_factory=BanditParams)
    envs: dict[EnvKey, dict[str, _ArmState]] = field(default_factory=dict)
    clock: int = 0

    def arm(self, env_key: EnvKey, profile_id: str) -> _ArmState:
        env = self.envs.setdefault(env_key, {})
        state = env.get(profile_id)
        if state is None:
            state = _ArmState(outcomes=deque(maxlen=self.params.window))
            env[profile_id] = state
        return state

    def in_cooldown(self, env_key: EnvKey, profile_id: str) -> bool:
        state = self.envs.get(env_key, {}).get(profile_id)
        return state is not None and state.cooldown_until > self.clock

    def residual(self, env_key: EnvKey, profile_id: str) -> float:
        state = self.envs.get(env_key, {}).get(profile_id)
        return 0.0 if state is None else state.delta_bar

    # ---- persistence ----------------------------------------------------

    def snapshot(self) -> dict:
        """JSON-able state for warm restarts."""
        return {
            "clock": self.clock,
            "params": {
                "alpha": self.params.alpha,
                "epsilon": self.params.epsilon,
                "violation_limit": self.params.violation_limit,
                "window": self.params.window,
                "cooldown": self.params.cooldown,
            },
            "envs": [
                {
                    "floor": floor,
                    "interval": interval,
                    "arms": [
                        {
                            "profile_id": pid,
                            "delta_bar": arm.delta_bar,
                            "count": arm.count,
                            "outcomes": [bool(v) for v in arm.outcomes],
                            "cooldown_until": arm.cooldown_until,
                        }
                        for pid, arm in sorted(env.items())
                    ],
                }
                for (floor, interval), env in sorted(self.envs.items())
            ],
        }

    @classmethod
    def restore(cls, data: dict) -> BanditState:
        params = BanditParams(**data["params"])
        state = cls(params=params, clock=int(data["clock"]))
        for env_data in data["envs"]:
            key = (float(env_data["floor"]), int(env_data["interval"]))
            for arm_data in env_data["arms"]:
                arm = state.arm(key, arm_data["profile_id"])
                arm.delta_bar = float(arm_data["delta_bar"])
                arm.count = int(arm_data["count"])
                arm.outcomes.extend(bool(v) for v in arm_data["outcomes"])
                arm.cooldown_until = int(arm_data["cooldown_until"])
        return state


@dataclass
class DecisionRecord:
    """One selection and, once observed, its outcome."""

    request_id: str
    profile_id: str
    predicted: float
    t_slo: float
    env_key: EnvKey | None
    explored: bool
    fallback: bool
    reason: str
    observed: float | None = None
    residual: float | None = None
    violated: bool | None = None


def _deterministic_order(profiles: Sequence[Profile]) -> list[Profile]:
    return sorted(profiles, key=lambda p: p.id)


def select_profile(
    c: ServiceContext,
    table: PolicyTable,
    bandit: BanditState,
    all_profiles: Sequence[Profile] = (),
    rng: np.random.Generator | None = None,
    request_id: str = "",
) -> tuple[Profile, DecisionRecord]:
    """Pick a profile for one request; total, worst case returns no-compression.

    ``all_profiles`` is the store-wide list used only by the quality/SLO
    fallback paths (the envelope is ignored there, per the conservative
    fallback rule).
    """
    # without an injected generator each call draws fresh OS entropy; pass a
    # seeded Generator for reproducible exploration
    rng = rng if rng is not None else np.random.default_rng()
    bandit.clock += 1

    def record(profile: Profile, env_key: EnvKey | None, explored: bool, fallback: bool, reason: str) -> tuple[Profile, DecisionRecord]:
        return profile, DecisionRecord(
            request_id=request_id,
            profile_id=profile.id,
            predicted=predict_latency(profile, c),
            t_slo=c.t_slo,
            env_key=env_key,
            explored=explored,
            fallback=fallback,
            reason=reason,
        )

    def conservative_fallback(env_key: EnvKey | None, reason: str) -> tuple[Profile, DecisionRecord]:
        eligible = [
            p for p in all_profiles
            if p.q >= c.q_min and predict_latency(p, c) <= c.t_slo
        ]
        if eligible:
            best = min(eligible, key=lambda p: (-p.q, -p.cr, p.id))
            return record(best, env_key, explored=False, fallback=True, reason=reason)
        return record(NO_COMPRESSION, env_key, explored=False, fallback=True, reason=reason)

    # 1. envelope lookup
    try:
        candidate_set = lookup(table, c)
    except QualityError:
        return conservative_fallback(None, "quality_fallback")
    env_key: EnvKey = (candidate_set.floor, candidate_set.interval)
    candidates = list(candidate_set.profiles)

    # 2. cooldown filter
    candidates = [p for p in candidates if not bandit.in_cooldown(env_key, p.id)]

    # 3. benefit-threshold filter (Theorem-1 rescue: no-compression if empty)
    beneficial = [p for p in candidates if c.bandwidth < benefit_threshold(p)]
    if not beneficial:
        return record(NO_COMPRESSION, env_key, explored=False, fallback=False, reason="benefit_rescue")
    candidates = beneficial

    # 4. conservative feasibility filter on the raw prediction
    feasible = [p for p in candidates if predict_latency(p, c) <= c.t_slo]
    if not feasible:
        return conservative_fallback(env_key, "slo_fallback")

    # 5. epsilon-greedy over corrected latency
    feasible = _deterministic_order(feasible)
    corrected = {
        p.id: predict_latency(p, c) + bandit.residual(env_key, p.id) for p in feasible
    }
    greedy = min(feasible, key=lambda p: (corrected[p.id], p.id))
    others = [p for p in feasible if p.id != greedy.id]
    if others and float(rng.random()) < bandit.params.epsilon:
        choice = others[int(rng.integers(len(others)))]
        return record(choice, env_key, explored=True, fallback=False, reason="explore")
    return record(greedy, env_key, explored=False, fallback=False, reason="exploit")


def observe_outcome(record: DecisionRecord, observed: float, bandit: BanditState) -> DecisionRecord:
    """Fold one observed latency into the bandit state.

    Updates the arm's EWMA residual and usage count, pushes the SLO outcome
    into the M-window, and triggers a cooldown (clearing the window) once
    violations reach the limit. Records with no environment key (quality
    fallback) only annotate the record.
    """
    record.observed = observed
    record.residual = observed - record.predicted
    record.violated = observed > record.t_slo
    if record.env_key is None:
        return record

    arm = bandit.arm(record.env_key, record.profile_id)
    alpha = bandit.params.alpha
    arm.delta_bar = (1.0 - alpha) * arm.delta_bar + alpha * record.residual
    arm.count += 1
    arm.outcomes.append(record.violated)
    if sum(arm.outcomes) >= bandit.params.violation_limit:
        arm.cooldown_until = bandit.clock + bandit.params.cooldown
        arm.outcomes.clear()
    return record
