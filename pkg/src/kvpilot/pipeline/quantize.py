"""Per-group asymmetric quantization with optional mixed per-head bit widths.

Groups are ``group_size`` consecutive channel values within one
(layer, head, token) row. Each group stores a 16-bit scale and a 16-bit zero
point; the scale and zero are rounded to float16 BEFORE symbols are computed,
so reconstruction error is bounded by half the stored scale at every
non-clamped symbol, by construction.

Mixed-head mode assigns ``high_bits`` to retrieval heads and ``low_bits`` to
streaming heads, with the class decided by per-head importance scores; the
class map costs one bit per head of metadata.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from kvpilot.pipeline.tensors import KVTensor

QUANT_KINDS = ("uniform_group", "mixed_head")


@dataclass(frozen=True)
class QuantConfig:
    """Quantizer knobs.

    ``bits`` applies to uniform_group; ``high_bits``/``low_bits``/
    ``retrieval_fraction`` apply to mixed_head. ``group_size`` must divide
    the channel count of the tensor being quantized.
    """

    kind: str = "uniform_group"
    bits: int = 4
    group_size: int = 32
    high_bits: int = 8
    low_bits: int = 2
    retrieval_fraction: float = 0.25

    def __post_init__(self) -> None:
        if self.kind not in QUANT_KINDS:
            raise ValueError(f"unknown quant kind {self.kind!r}; expected one of {QUANT_KINDS}")
        if self.group_size < 1:
            raise ValueError(f"group_size must be >= 1, got {self.group_size}")
        if self.kind == "uniform_group":
            if not 1 <= self.bits <= 8:
                raise ValueError(f"bits must be in 1..8, got {self.bits}")
            # unused mixed-head knobs are pinned so equality is semantic
            object.__setattr__(self, "high_bits", 8)
            object.__setattr__(self, "low_bits", 2)
            object.__setattr__(self, "retrieval_fraction", 0.25)
        else:
            for name, value in (("high_bits", self.high_bits), ("low_bits", self.low_bits)):
                if not 1 <= value <= 8:
                    raise ValueError(f"{name} must be in 1..8, got {value}")
            if self.high_bits <= self.low_bits:
                raise ValueError(f"high_bits must exceed low_bits, got {self.high_bits} <= {self.low_bits}")
            if not 0.0 <= self.retrieval_fraction <= 1.0:
                raise ValueError(f"retrieval_fraction must be in [0, 1], got {self.retrieval_fraction}")
            object.__setattr__(self, "bits", 4)


@dataclass(frozen=True, eq=False)
class QuantizedTensor:
    """Quantized symbols plus the metadata needed to reconstruct.

    Attributes:
        symbols: uint8 array (layers, heads, tokens, channels).
        scales: float16 array (layers, heads, tokens, channels // group_size).
        zeros: float16 array, same shape as scales.
        bits_per_head: uint8 array (layers, heads); symbol bit width per head.
        head_classes: bool array (layers, heads), True for retrieval heads;
            None for uniform quantization.
        head_importance: carried through for reconstruction convenience; not
            part of the metadata byte accounting.
    """

    symbols: np.ndarray
    scales: np.ndarray
    zeros: np.ndarray
    group_size: int
    bits_per_head: np.ndarray
    head_classes: np.ndarray | None
    head_importance: np.ndarray

    @property
    def metadata_nbytes(self) -> int:
        """Bytes of side information: group headers plus the head class map."""
        count = self.scales.size * 2 + self.zeros.size * 2
        if self.head_classes is not None:
            count += math.ceil(self.head_classes.size / 8)
        return count


def classify_heads(x: KVTensor, retrieval_fraction: float) -> np.ndarray:
    """Label the top ceil(rho * layers * heads) heads by importance as retrieval.

    Ties are broken by (layer, head) index ascending. Returns a bool array of
    shape (layers, heads), True meaning retrieval.
    """
    if not 0.0 <= retrieval_fraction <= 1.0:
        raise ValueError(f"retrieval_fraction must be in [0, 1], got {retrieval_fraction}")
    flat = x.head_importance.reshape(-1)
    k = math.ceil(retrieval_fraction * flat.size)
    labels = np.zeros(flat.size, dtype=bool)
    if k > 0:
        # stable sort on negated scores keeps ascending index order within ties
        order = np.argsort(-flat, kind="stable")
        labels[order[:k]] = True
    return labels.reshape(x.head_importance.shape)


def _bits_per_head(x: KVTensor, q: QuantConfig, head_classes: np.ndarray | None) -> np.ndarray:
    if q.kind == "uniform_group":
        return np.full((x.layers, x.heads), q.bits, dtype=np.uint8)
    if head_classes is None:
        raise ValueError("mixed_head quantization needs head labels from classify_heads")
    head_classes = np.asarray(head_classes, dtype=bool)
    if head_classes.shape != (x.layers, x.heads):
        raise ValueError(f"head labels shape {head_classes.shape} does not match heads {(x.layers, x.heads)}")
    return np.where(head_classes, q.high_bits, q.low_bits).astype(np.uint8)


def quantize(x: KVTensor, q: QuantConfig, head_classes: np.ndarray | None = None) -> QuantizedTensor:
    """Quantize a (possibly transformed) tensor to per-group symbols.

    Within each group: scale = (max - min) / (2^b - 1) and zero = min, both
    stored as float16; symbol = round((v - zero) / scale) clamped to
    [0, 2^b - 1]. A degenerate group (max == min, or a scale that underflows
    float16) stores scale = 0 and dequantizes to its stored zero exactly.
    """
    if x.channels % q.group_size != 0:
        raise ValueError(f"group_size {q.group_size} does not divide channels {x.channels}")
    if q.kind == "mixed_head" and head_classes is None:
        head_classes = classify_heads(x, q.retrieval_fraction)
    bits = _bits_per_head(x, q, head_classes)
    levels = (2.0 ** bits.astype(np.float64) - 1.0)[:, :, None, None]

    layers, heads, tokens, channels = x.values.shape
    grouped = x.values.reshape(layers, heads, tokens, channels // q.group_size, q.group_size)
    group_min = grouped.min(axis=-1)
    group_max = grouped.max(axis=-1)

    scales16 = ((group_max - group_min) / levels).astype(np.float16)
    zeros16 = group_min.astype(np.float16)

    scale32 = scales16.astype(np.float32)
    zero32 = zeros16.astype(np.float32)
    safe_scale = np.where(scale32 > 0.0, scale32, 1.0)
    raw = np.rint((grouped - zero32[..., None]) / safe_scale[..., None])
    clipped = np.clip(raw, 0.0, levels[..., None])
    symbols = np.where(scale32[..., None] > 0.0, clipped, 0.0).astype(np.uint8)

    return QuantizedTensor(
        symbols=symbols.reshape(layers, heads, tokens, channels),
        scales=scales16,
        zeros=zeros16,
        group_size=q.group_size,
        bits_per_head=bits,
        head_classes=None if q.kind == "uniform_group" else np.asarray(head_classes, dtype=bool),
        head_importance=x.head_importance,
    )


def dequantize(qt: QuantizedTensor, q: QuantConfig) -> KVTensor:
    """Reconstruct values from symbols: v = zero + symbol * scale."""
    layers, heads, tokens, channels = qt.symbols.shape
    groups = channels // qt.group_size
    if qt.group_size != q.group_size:
        raise ValueError(f"group_size mismatch: blob has {qt.group_size}, config has {q.group_size}")
    if qt.scales.shape != (layers, heads, tokens, groups) or qt.zeros.shape != qt.scales.shape:
        raise ValueError(f"metadata shape {qt.scales.shape} inconsistent with symbols {qt.symbols.shape}")
    scale32 = qt.scales.astype(np.float32)
    zero32 = qt.zeros.astype(np.float32)
    grouped = qt.symbols.reshape(layers, heads, tokens, groups, qt.group_size).astype(np.float32)
    recon = zero32[..., None] + grouped * scale32[..., None]
    return KVTensor(
        values=recon.reshape(layers, heads, tokens, channels),
        head_importance=qt.head_importance,
    )
