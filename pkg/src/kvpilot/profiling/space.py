"""Strategy-space enumeration and the unified embedding.

The space is the Cartesian product of categorical axes (transform, quant
kind, codec) and per-kind numeric grids, with structural validity filtering:
uniform quantizers ignore the mixed-head axes and vice versa, and mixed
pairs require high_bits > low_bits.

Embeddings concatenate one-hot blocks for the categorical axes with
min-max-scaled numeric entries; a single-value numeric axis maps to 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from kvpilot.pipeline.codecs import CodecConfig
from kvpilot.pipeline.quantize import QuantConfig
from kvpilot.pipeline.strategy import StrategyConfig, analytic_cr
from kvpilot.pipeline.transforms import TransformConfig


@dataclass(frozen=True)
class SpaceDef:
    """Axis grids defining one finite strategy space."""

    transforms: tuple[str, ...] = ("identity", "delta_over_tokens", "hadamard_over_channels")
    quant_kinds: tuple[str, ...] = ("uniform_group", "mixed_head")
    bits: tuple[int, ...] = (2, 3, 4, 8)
    group_sizes: tuple[int, ...] = (32, 64)
    high_bits: tuple[int, ...] = (4, 8)
    low_bits: tuple[int, ...] = (2, 4)
    retrieval_fractions: tuple[float, ...] = (0.125, 0.25)
    codecs: tuple[str, ...] = ("none", "rle_bitpack", "entropy")

    def __post_init__(self) -> None:
        if not self.transforms or not self.quant_kinds or not self.codecs or not self.group_sizes:
            raise ValueError("every categorical axis needs at least one entry")
        if "uniform_group" in self.quant_kinds and not self.bits:
            raise ValueError("uniform_group quantization needs a nonempty bits grid")
        if "mixed_head" in self.quant_kinds:
            if not self.high_bits or not self.low_bits or not self.retrieval_fractions:
                raise ValueError("mixed_head quantization needs high_bits, low_bits, and retrieval_fractions")
            if not any(hi > lo for hi in self.high_bits for lo in self.low_bits):
                raise ValueError("no valid (high_bits, low_bits) pair with high > low")


@dataclass(frozen=True, eq=False)
class StrategySpace:
    """Enumerated candidates with precomputed embeddings and CR estimates."""

    definition: SpaceDef
    candidates: tuple[StrategyConfig, ...]
    embeddings: np.ndarray  # (n, d) float64
    cr_estimates: np.ndarray  # (n,) float64
    index_by_id: dict[str, int] = field(repr=False, default_factory=dict)

    def __len__(self) -> int:
        return len(self.candidates)


def _minmax(value: float, grid: tuple) -> float:
    lo, hi = min(grid), max(grid)
    if hi == lo:
        return 0.0
    return (float(value) - lo) / (hi - lo)


def _onehot(value, axis: tuple) -> list[float]:
    block = [0.0] * len(axis)
    block[axis.index(value)] = 1.0
    return block


def encode_config(c: StrategyConfig, space: SpaceDef) -> np.ndarray:
    """Embed one strategy: one-hot categorical blocks ++ scaled numeric axes.

    Numeric axes not used by the strategy's quantizer kind are set to 0; the
    quant-kind one-hot block keeps the embedding injective across kinds.
    """
    for axis_name, value, axis in (
        ("transform", c.transform.kind, space.transforms),
        ("quant kind", c.quant.kind, space.quant_kinds),
        ("codec", c.codec.kind, space.codecs),
    ):
        if value not in axis:
            raise ValueError(f"{axis_name} {value!r} is outside the space axis {axis}")
    q = c.quant
    if q.kind == "uniform_group":
        if q.bits not in space.bits:
            raise ValueError(f"bits {q.bits} outside grid {space.bits}")
        numeric = [_minmax(q.bits, space.bits), _minmax(q.group_size, space.group_sizes), 0.0, 0.0, 0.0]
    else:
        for axis_name, value, axis in (
            ("high_bits", q.high_bits, space.high_bits),
            ("low_bits", q.low_bits, space.low_bits),
            ("retrieval_fraction", q.retrieval_fraction, space.retrieval_fractions),
        ):
            if value not in axis:
                raise ValueError(f"{axis_name} {value} outside grid {axis}")
        numeric = [
            0.0,
            _minmax(q.group_size, space.group_sizes),
            _minmax(q.high_bits, space.high_bits),
            _minmax(q.low_bits, space.low_bits),
            _minmax(q.retrieval_fraction, space.retrieval_fractions),
        ]
    if q.group_size not in space.group_sizes:
        raise ValueError(f"group_size {q.group_size} outside grid {space.group_sizes}")
    parts = (
        _onehot(c.transform.kind, space.transforms)
        + _onehot(q.kind, space.quant_kinds)
        + _onehot(c.codec.kind, space.codecs)
        + numeric
    )
    return np.asarray(parts, dtype=np.float64)


def enumerate_space(definition: SpaceDef) -> StrategySpace:
    """Materialize the full candidate list in deterministic nested-loop order."""
    candidates: list[StrategyConfig] = []
    for t_kind in definition.transforms:
        for q_kind in definition.quant_kinds:
            if q_kind == "uniform_group":
                quants = [
                    QuantConfig(kind=q_kind, bits=b, group_size=g)
                    for b in definition.bits
                    for g in definition.group_sizes
                ]
            else:
                quants = [
                    QuantConfig(kind=q_kind, high_bits=hi, low_bits=lo, group_size=g, retrieval_fraction=rho)
                    for hi in definition.high_bits
                    for lo in definition.low_bits
                    if hi > lo
                    for g in definition.group_sizes
                    for rho in definition.retrieval_fractions
                ]
            for quant in quants:
                for c_kind in definition.codecs:
                    candidates.append(
                        StrategyConfig(
                            transform=TransformConfig(kind=t_kind),
                            quant=quant,
                            codec=CodecConfig(kind=c_kind),
                        )
                    )
    ids = [c.id for c in candidates]
    if len(set(ids)) != len(ids):
        raise ValueError("space enumeration produced duplicate strategy ids")
    embeddings = np.stack([encode_config(c, definition) for c in candidates])
    cr_estimates = np.asarray([analytic_cr(c) for c in candidates], dtype=np.float64)
    return StrategySpace(
        definition=definition,
        candidates=tuple(candidates),
        embeddings=embeddings,
        cr_estimates=cr_estimates,
        index_by_id={cid: i for i, cid in enumerate(ids)},
    )


# --------------------------------------------------------------------------
# quasi-random seeding
# --------------------------------------------------------------------------


def _primes(count: int) -> list[int]:
    found: list[int] = []
    n = 2
    while len(found) < count:
        if all(n % p for p in found):
            found.append(n)
        n += 1
    return found


def _van_der_corput(index: int, base: int) -> float:
    result, fraction = 0.0, 1.0
    while index > 0:
        fraction /= base
        result += fraction * (index % base)
        index //= base
    return result


def halton_points(count: int, dim: int) -> np.ndarray:
    """The first ``count`` Halton points in [0, 1]^dim (1-based indices)."""
    bases = _primes(dim)
    return np.asarray(
        [[_van_der_corput(i, b) for b in bases] for i in range(1, count + 1)], dtype=np.float64
    )


def halton_seed_indices(embeddings: np.ndarray, count: int) -> list[int]:
    """Project Halton points to their nearest distinct candidates.

    Deterministic: each point claims the unclaimed candidate with minimal
    Euclidean distance (ties to the smaller index).
    """
    n, dim = embeddings.shape
    count = min(count, n)
    chosen: list[int] = []
    taken = np.zeros(n, dtype=bool)
    for point in halton_points(count, dim):
        distances = np.linalg.norm(embeddings - point[None, :], axis=1)
        distances[taken] = np.inf
        index = int(np.argmin(distances))  # argmin takes the first minimum: smaller index wins ties
        chosen.append(index)
        taken[index] = True
    return chosen
