"""Service-aware online profile selection.

An analytic latency model scores each profile triple (cr, s, q) under a
service context; Theorem-style benefit thresholds say when compression helps
at all; per-quality-bucket lower envelopes over x = 1/bandwidth make the
model-optimal profile a piecewise-constant lookup; and a residual-corrected
epsilon-greedy bandit adapts the choice online under drift, with SLO
violation cooldowns as guardrails.
"""

from __future__ import annotations

from kvpilot.control.bandit import (
    BanditParams,
    BanditState,
    DecisionRecord,
    observe_outcome,
    select_profile,
)
from kvpilot.control.envelope import (
    DEFAULT_BUCKET_FLOORS,
    BucketEnvelope,
    CandidateSet,
    PolicyTable,
    QualityError,
    bucket_for,
    build_policy_table,
    lookup,
)
from kvpilot.control.latency import (
    NO_COMPRESSION,
    Profile,
    ServiceContext,
    benefit_threshold,
    predict_latency,
)

__all__ = [
    "BanditParams",
    "BanditState",
    "BucketEnvelope",
    "CandidateSet",
    "DEFAULT_BUCKET_FLOORS",
    "DecisionRecord",
    "NO_COMPRESSION",
    "PolicyTable",
    "Profile",
    "QualityError",
    "ServiceContext",
    "bucket_for",
    "benefit_threshold",
    "build_policy_table",
    "lookup",
    "observe_outcome",
    "predict_latency",
    "select_profile",
]
