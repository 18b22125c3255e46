"""Deterministic discrete-event simulation of disaggregated serving.

Requests stream through five stages (prefill, compress, communicate,
decompress, decode) over a piecewise-constant bandwidth trace, with
optional throughput drift. Controller modes range from the full
bandit-corrected selector down to static and no-compression baselines.
"""

from __future__ import annotations

from kvpilot.sim.engine import (
    DriftModel,
    PolicyAssets,
    RequestRecord,
    Scenario,
    SimMetrics,
    StageTimes,
    report_breakdown,
    run_scenario,
    simulate_request,
)
from kvpilot.sim.trace import (
    GBPS_TO_BYTES_PER_S,
    BandwidthTrace,
    bandwidth_at,
    constant_trace,
    format_trace,
    parse_trace,
    transfer_seconds,
)
from kvpilot.sim.workload import Request, WorkloadSpec, generate_requests

__all__ = [
    "BandwidthTrace",
    "DriftModel",
    "GBPS_TO_BYTES_PER_S",
    "PolicyAssets",
    "Request",
    "RequestRecord",
    "Scenario",
    "SimMetrics",
    "StageTimes",
    "WorkloadSpec",
    "bandwidth_at",
    "constant_trace",
    "format_trace",
    "generate_requests",
    "parse_trace",
    "report_breakdown",
    "run_scenario",
    "simulate_request",
    "transfer_seconds",
]
