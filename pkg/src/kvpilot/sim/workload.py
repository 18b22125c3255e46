"""Synthetic request streams for the serving simulator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Request:
    """One inference request as seen by the transfer path.

    ``volume`` is the KV payload in bytes; ``t_prefill`` and ``t_decode``
    are the compute times that bracket the transfer stages.
    """

    id: str
    arrival: float
    workload: str
    volume: float
    t_prefill: float
    t_decode: float
    t_slo: float
    q_min: float

    def __post_init__(self) -> None:
        if self.volume <= 0.0:
            raise ValueError("volume must be positive")
        if self.arrival < 0.0:
            raise ValueError("arrival must be non-negative")
        if self.t_prefill < 0.0 or self.t_decode < 0.0:
            raise ValueError("compute times must be non-negative")
        if self.t_slo <= 0.0:
            raise ValueError("t_slo must be positive")
        if not 0.0 <= self.q_min <= 1.0:
            raise ValueError("q_min must lie in [0, 1]")


@dataclass(frozen=True)
class WorkloadSpec:
    """Arrival-process and sizing parameters for one workload class."""

    name: str
    weight: float = 1.0
    mean_volume: float = float(2**30)
    volume_sigma: float = 0.25
    t_prefill: float = 0.5
    t_decode: float = 1.0
    t_slo: float = 20.0
    q_min: float = 0.90


def generate_requests(
    specs: tuple[WorkloadSpec, ...],
    count: int,
    mean_interarrival: float = 1.0,
    start: float = 0.0,
    seed: int = 0,
) -> tuple[Request, ...]:
    """Draw ``count`` requests with exponential gaps and lognormal volumes.

    Workload classes are sampled by weight. Volumes are lognormal around
    each class mean so that the transfer stage sees realistic spread.
    """
    if count <= 0:
        raise ValueError("count must be positive")
    if not specs:
        raise ValueError("at least one workload spec is required")
    if mean_interarrival <= 0.0:
        raise ValueError("mean_interarrival must be positive")
    weights = np.array([s.weight for s in specs], dtype=np.float64)
    if np.any(weights <= 0.0):
        raise ValueError("workload weights must be positive")
    probs = weights / weights.sum()
    rng = np.random.default_rng(seed)
    gaps = rng.exponential(mean_interarrival, size=count)
    arrivals = start + np.cumsum(gaps)
    choices = rng.choice(len(specs), size=count, p=probs)
    # Lognormal with unit median scaled by the class mean volume.
    noise = rng.lognormal(mean=0.0, sigma=1.0, size=count)
    requests = []
    for i in range(count):
        spec = specs[int(choices[i])]
        volume = spec.mean_volume * noise[i] ** spec.volume_sigma
        requests.append(
            Request(
                id=f"r{i:05d}",
                arrival=float(arrivals[i]),
                workload=spec.name,
                volume=float(volume),
                t_prefill=spec.t_prefill,
                t_decode=spec.t_decode,
                t_slo=spec.t_slo,
                q_min=spec.q_min,
            )
        )
    return tuple(requests)
