"""Piecewise-constant bandwidth traces and transfer-time integration.

A trace is a sorted sequence of (time_s, bandwidth_gbps) breakpoints.
Bandwidth is right-continuous: the rate at a breakpoint is the rate of
the segment that starts there, and the last segment extends forever.
Rates use decimal gigabits, so 1 Gbps moves 1.25e8 bytes per second.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

# Decimal gigabit: 1e9 bits/s == 1.25e8 bytes/s.
GBPS_TO_BYTES_PER_S = 1.25e8


@dataclass(frozen=True)
class BandwidthTrace:
    """Right-continuous step function of link bandwidth over time.

    ``times`` must be strictly increasing and ``rates`` holds the
    bandwidth in Gbps for the segment starting at each breakpoint.
    """

    times: tuple[float, ...]
    rates: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.times) == 0:
            raise ValueError("trace needs at least one breakpoint")
        if len(self.times) != len(self.rates):
            raise ValueError("times and rates must have equal length")
        for earlier, later in zip(self.times, self.times[1:]):
            if later <= earlier:
                raise ValueError("trace times must be strictly increasing")
        for rate in self.rates:
            if rate <= 0.0:
                raise ValueError("bandwidth must be positive")

    @property
    def start(self) -> float:
        return self.times[0]


def constant_trace(rate_gbps: float, start: float = 0.0) -> BandwidthTrace:
    return BandwidthTrace(times=(start,), rates=(rate_gbps,))


def bandwidth_at(trace: BandwidthTrace, t: float) -> float:
    """Bandwidth in Gbps at time ``t`` (right-continuous lookup)."""
    if t < trace.start:
        raise ValueError(f"time {t!r} precedes trace start {trace.start!r}")
    idx = bisect_right(trace.times, t) - 1
    return trace.rates[idx]


def transfer_seconds(trace: BandwidthTrace, start: float, nbytes: float) -> float:
    """Time to move ``nbytes`` beginning at ``start``, integrating the trace.

    Each segment contributes bytes at its constant rate until either the
    payload is exhausted or the next breakpoint arrives. The final
    segment is unbounded, so every positive payload finishes.
    """
    if nbytes < 0.0:
        raise ValueError("nbytes must be non-negative")
    if nbytes == 0.0:
        return 0.0
    if start < trace.start:
        raise ValueError(f"time {start!r} precedes trace start {trace.start!r}")
    idx = bisect_right(trace.times, start) - 1
    now = start
    left = float(nbytes)
    while True:
        rate = trace.rates[idx] * GBPS_TO_BYTES_PER_S
        if idx + 1 < len(trace.times):
            window = trace.times[idx + 1] - now
            moved = rate * window
            if moved < left:
                left -= moved
                now = trace.times[idx + 1]
                idx += 1
                continue
        return (now - start) + left / rate


def parse_trace(text: str) -> BandwidthTrace:
    """Parse the ``t_s,bandwidth_gbps`` text format (one row per line).

    Blank lines and ``#`` comment lines are skipped; a single header row
    of column names is accepted.
    """
    times: list[float] = []
    rates: list[float] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise ValueError(f"trace line {lineno}: expected 2 columns, got {len(parts)}")
        if parts == ["t_s", "bandwidth_gbps"]:
            continue
        try:
            times.append(float(parts[0]))
            rates.append(float(parts[1]))
        except ValueError as exc:
            raise ValueError(f"trace line {lineno}: {exc}") from None
    if not times:
        raise ValueError("trace has no data rows")
    return BandwidthTrace(times=tuple(times), rates=tuple(rates))


def format_trace(trace: BandwidthTrace) -> str:
    lines = ["t_s,bandwidth_gbps"]
    for t, r in zip(trace.times, trace.rates):
        lines.append(f"{t!r},{r!r}")
    return "\n".join(lines) + "\n"
