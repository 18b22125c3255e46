"""Analytic per-request latency model and the compression benefit threshold.

A profile is the online triple (cr, s, q): compression ratio, effective
codec throughput (bytes/s, with V/s the total encode+decode time), and
quality. The segment job completion time under context c is

    T_p(c) = T_model + V/s_p + V/(B * cr_p)

and the no-compression profile (cr = 1, s = infinity) reduces to
T_0(c) = T_model + V/B. Compression strictly helps exactly when the current
bandwidth sits below the profile's benefit threshold (1 - 1/cr) * s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Profile:
    """One selectable compression profile.

    ``s`` is the effective (series-combined) codec throughput. The encode
    and decode sides can be given explicitly; when only ``s`` is known the
    split defaults to symmetric (s_enc = s_dec = 2s), and when only the
    sides are known, s is derived as their series combination.
    """

    id: str
    cr: float
    s: float | None = None
    q: float = 1.0
    s_enc: float | None = None
    s_dec: float | None = None
    strategy_id: str | None = None

    def __post_init__(self) -> None:
        s, s_enc, s_dec = self.s, self.s_enc, self.s_dec
        if s is None:
            if s_enc is None or s_dec is None:
                raise ValueError("profile needs either s or both s_enc and s_dec")
            s = math.inf if math.isinf(s_enc) and math.isinf(s_dec) else (s_enc * s_dec) / (s_enc + s_dec)
        else:
            if s_enc is None:
                s_enc = 2.0 * s
            if s_dec is None:
                s_dec = 2.0 * s
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "s_enc", s_enc)
        object.__setattr__(self, "s_dec", s_dec)
        if self.cr < 1.0:
            raise ValueError(f"cr must be >= 1, got {self.cr}")
        for name in ("s", "s_enc", "s_dec"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"quality must be in [0, 1], got {self.q}")


NO_COMPRESSION = Profile(id="no_compression", cr=1.0, s=math.inf, q=1.0)


@dataclass(frozen=True)
class ServiceContext:
    """Per-request service context: workload, bandwidth, budget, quality floor."""

    workload: str
    bandwidth: float  # bytes/s
    t_slo: float  # seconds
    q_min: float
    volume: float  # bytes of KV state to move
    t_model: float  # strategy-independent model time, seconds

    def __post_init__(self) -> None:
        if self.bandwidth <= 0.0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.volume < 0.0:
            raise ValueError(f"volume must be non-negative, got {self.volume}")
        if self.t_slo <= 0.0:
            raise ValueError(f"t_slo must be positive, got {self.t_slo}")
        if not 0.0 <= self.q_min <= 1.0:
            raise ValueError(f"q_min must be in [0, 1], got {self.q_min}")


def predict_latency(p: Profile, c: ServiceContext) -> float:
    """T_p(c) = T_model + V/s + V/(B*cr); the V/s term vanishes for s = inf."""
    codec_time = 0.0 if math.isinf(p.s) else c.volume / p.s
    return c.t_model + codec_time + c.volume / (c.bandwidth * p.cr)


def benefit_threshold(p: Profile) -> float:
    """Bandwidth below which the profile beats no compression: (1 - 1/cr) * s.

    An identity profile (cr = 1) is never beneficial, threshold 0. For
    every V > 0: T_p(c) < T_0(c) iff c.bandwidth < benefit_threshold(p).
    """
    if p.cr <= 1.0:
        return 0.0
    return (1.0 - 1.0 / p.cr) * p.s
