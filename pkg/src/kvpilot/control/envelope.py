"""Quality-bucketed lower-envelope policy tables over x = 1/bandwidth.

Rewriting the bandwidth-dependent part of the latency model per unit volume
as a line in x = 1/B,

    T~_p(x) = 1/s_p + x/cr_p,

the best profile at any bandwidth is the minimum over lines, so the optimal
policy is piecewise constant in x. Envelopes are built per quality bucket;
buckets are cumulative (floor f holds every profile with q >= f) and a
request's q_min maps to the lowest floor at or above it.

Ties (coincident lines, or a query exactly on a breakpoint) break toward
higher q, then higher cr, then smaller id. Intervals are half-open
[x_i, x_{i+1}) with exact-breakpoint queries resolved by the same tie rule.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Sequence

from kvpilot.control.latency import Profile, ServiceContext

DEFAULT_BUCKET_FLOORS = (0.90, 0.95, 0.97, 0.99)


class QualityError(ValueError):
    """No bucket can serve the requested q_min; the caller should fall back."""


def bucket_for(q_min: float, floors: Sequence[float]) -> float:
    """Lowest bucket floor at or above q_min."""
    eligible = [f for f in floors if f >= q_min]
    if not eligible:
        raise QualityError(f"q_min {q_min} exceeds every bucket floor {tuple(floors)}")
    return min(eligible)


def _tie_winner(a: Profile, b: Profile) -> Profile:
    """Higher q, then higher cr, then smaller id."""
    return min((a, b), key=lambda p: (-p.q, -p.cr, p.id))


@dataclass(frozen=True)
class _Line:
    slope: float  # 1/cr
    intercept: float  # 1/s (0 for the no-compression sentinel)
    profile: Profile


@dataclass(frozen=True)
class BucketEnvelope:
    """Lower envelope of one bucket: segment i covers [starts[i], starts[i+1])."""

    floor: float
    starts: tuple[float, ...]  # starts[0] == x_lo, strictly increasing
    profiles: tuple[Profile, ...]  # same length as starts


@dataclass(frozen=True)
class PolicyTable:
    """Per-bucket envelopes over a configured x = 1/B range."""

    x_lo: float
    x_hi: float
    floors: tuple[float, ...]
    buckets: dict[float, BucketEnvelope]


@dataclass(frozen=True)
class CandidateSet:
    """Model-optimal profile plus its envelope neighbors (at most 3 total)."""

    optimal: Profile
    neighbors: tuple[Profile, ...]
    floor: float
    interval: int

    @property
    def profiles(self) -> tuple[Profile, ...]:
        return (self.optimal, *self.neighbors)


def _lower_envelope(lines: list[_Line], x_lo: float, x_hi: float) -> tuple[list[float], list[Profile]]:
    """Minimum envelope via sort-by-slope incremental hull, clipped to [x_lo, x_hi]."""
    # coincident lines: keep only the tie-rule winner
    by_coeffs: dict[tuple[float, float], _Line] = {}
    for line in lines:
        key = (line.slope, line.intercept)
        held = by_coeffs.get(key)
        if held is None or _tie_winner(held.profile, line.profile) is line.profile:
            by_coeffs[key] = line
    # equal slope, higher intercept is dominated outright
    by_slope: dict[float, _Line] = {}
    for line in sorted(by_coeffs.values(), key=lambda l: (l.slope, l.intercept)):
        by_slope.setdefault(line.slope, line)

    # steepest first: the active slope decreases as x grows
    ordered = sorted(by_slope.values(), key=lambda l: -l.slope)
    hull: list[_Line] = []
    starts: list[float] = []
    for line in ordered:
        while hull:
            top = hull[-1]
            cross = (line.intercept - top.intercept) / (top.slope - line.slope)
            if cross <= starts[-1]:
                hull.pop()
                starts.pop()
                continue
            hull.append(line)
            starts.append(cross)
            break
        if not hull:
            hull.append(line)
            starts.append(-math.inf)

    # clip to the configured range
    first = 0
    for i in range(len(hull)):
        if starts[i] <= x_lo:
            first = i
    seg_starts: list[float] = []
    seg_profiles: list[Profile] = []
    for i in range(first, len(hull)):
        if starts[i] > x_hi:
            break
        seg_starts.append(x_lo if i == first else starts[i])
        seg_profiles.append(hull[i].profile)
    return seg_starts, seg_profiles


def build_policy_table(
    profiles: Iterable[Profile],
    bucket_floors: Sequence[float] = DEFAULT_BUCKET_FLOORS,
    x_lo: float = 1e-11,
    x_hi: float = 1e-7,
) -> PolicyTable:
    """Build per-bucket envelopes; buckets whose floor no profile meets are absent.

    The default x range corresponds to bandwidths between 10 MB/s and
    100 GB/s. Raises on an empty profile list or an empty x range.
    """
    profiles = list(profiles)
    if not profiles:
        raise ValueError("cannot build a policy table from zero profiles")
    if not bucket_floors:
        raise ValueError("need at least one bucket floor")
    if not 0.0 < x_lo < x_hi:
        raise ValueError(f"need 0 < x_lo < x_hi, got [{x_lo}, {x_hi}]")
    buckets: dict[float, BucketEnvelope] = {}
    for floor in sorted(bucket_floors):
        members = [p for p in profiles if p.q >= floor]
        if not members:
            continue
        lines = [
            _Line(slope=1.0 / p.cr, intercept=0.0 if math.isinf(p.s) else 1.0 / p.s, profile=p)
            for p in members
        ]
        starts, owners = _lower_envelope(lines, x_lo, x_hi)
        buckets[floor] = BucketEnvelope(floor=floor, starts=tuple(starts), profiles=tuple(owners))
    return PolicyTable(x_lo=x_lo, x_hi=x_hi, floors=tuple(sorted(bucket_floors)), buckets=buckets)


def lookup(table: PolicyTable, c: ServiceContext) -> CandidateSet:
    """Binary-search the envelope for x = 1/bandwidth.

    Returns the model-optimal segment owner plus the owners of the adjacent
    segments (deduplicated). Queries outside the configured x range clamp to
    its ends; a q_min no bucket floor reaches raises :class:`QualityError`.
    """
    floor = bucket_for(c.q_min, table.floors)
    envelope = table.buckets.get(floor)
    if envelope is None:
        raise QualityError(f"no profile meets bucket floor {floor}")
    x = min(max(1.0 / c.bandwidth, table.x_lo), table.x_hi)
    interval = bisect_right(envelope.starts, x) - 1
    optimal = envelope.profiles[interval]
    # a query exactly on a breakpoint ties between the incident owners
    if interval > 0 and x == envelope.starts[interval]:
        optimal = _tie_winner(envelope.profiles[interval - 1], envelope.profiles[interval])
    neighbors = []
    for j in (interval - 1, interval + 1):
        if 0 <= j < len(envelope.profiles):
            neighbor = envelope.profiles[j]
            if neighbor.id != optimal.id and all(neighbor.id != n.id for n in neighbors):
                neighbors.append(neighbor)
    return CandidateSet(optimal=optimal, neighbors=tuple(neighbors), floor=floor, interval=interval)


def policy_table_export(table: PolicyTable) -> dict:
    """Plain-dict form: per bucket, segment bounds in x plus bits/s bandwidth.

    Segment [x_i, x_{i+1}) corresponds to bandwidths (1/x_{i+1}, 1/x_i] in
    bytes/s; both ends are also reported in bits/s for inspection.
    """
    out: dict = {"x_lo": table.x_lo, "x_hi": table.x_hi, "buckets": []}
    for floor in table.floors:
        envelope = table.buckets.get(floor)
        if envelope is None:
            continue
        segments = []
        for i, profile in enumerate(envelope.profiles):
            seg_lo = envelope.starts[i]
            seg_hi = envelope.starts[i + 1] if i + 1 < len(envelope.starts) else table.x_hi
            segments.append(
                {
                    "x_lo": seg_lo,
                    "x_hi": seg_hi,
                    "profile_id": profile.id,
                    "bandwidth_lo_bits_per_s": 8.0 / seg_hi,
                    "bandwidth_hi_bits_per_s": 8.0 / seg_lo,
                }
            )
        out["buckets"].append({"floor": floor, "segments": segments})
    return out
