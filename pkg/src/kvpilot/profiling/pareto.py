"""3D Pareto frontier over (accuracy, compression ratio, latency).

Accuracy and compression ratio are maximized, latency is minimized. The
frontier is maintained incrementally; exact duplicates collapse to the
lexicographically smallest id before dominance filtering.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable


@dataclass(frozen=True, order=True)
class ParetoPoint:
    id: str
    acc: float
    cr: float
    lat: float


def dominates(q: ParetoPoint, p: ParetoPoint) -> bool:
    """True iff q is at least as good everywhere and strictly better somewhere."""
    if q.acc < p.acc or q.cr < p.cr or q.lat > p.lat:
        return False
    return q.acc > p.acc or q.cr > p.cr or q.lat < p.lat


def pareto_frontier(points: Iterable[ParetoPoint]) -> list[ParetoPoint]:
    """Non-dominated subset, sorted by id so output is order-independent."""
    unique: dict[tuple[float, float, float], ParetoPoint] = {}
    for p in points:
        key = (p.acc, p.cr, p.lat)
        held = unique.get(key)
        if held is None or p.id < held.id:
            unique[key] = p

    front: list[ParetoPoint] = []
    for p in sorted(unique.values()):
        if any(dominates(q, p) for q in front):
            continue
        front = [q for q in front if not dominates(p, q)]
        front.append(p)
    return sorted(front)
