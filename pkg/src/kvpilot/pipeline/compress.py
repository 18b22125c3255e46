"""End-to-end pipeline: transform -> quantize -> lossless codec, with metrics.

Throughput measurement is injectable. The default wall-clock timer reports
the median of three timed runs; the deterministic cost-model timer assigns
fixed per-byte stage costs so that downstream artifacts are byte-identical
across reruns of the same seed and config.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass
from typing import Callable, Protocol, TypeVar

from kvpilot.pipeline.codecs import CodecError, CompressedBlob, decode_lossless, encode_lossless
from kvpilot.pipeline.quantize import classify_heads, dequantize, quantize
from kvpilot.pipeline.strategy import StrategyConfig
from kvpilot.pipeline.tensors import KVTensor, quality_score
from kvpilot.pipeline.transforms import apply_transform, invert_transform

T = TypeVar("T")


@dataclass(frozen=True)
class PipelineMetrics:
    """Measured profile of one compression run.

    ``s_p`` is the effective codec throughput: V/s_p equals total encode plus
    decode time, hence s_p = s_enc * s_dec / (s_enc + s_dec).
    """

    cr: float
    s_enc: float
    s_dec: float
    quality: float

    @property
    def s_p(self) -> float:
        return self.s_enc * self.s_dec / (self.s_enc + self.s_dec)


class StageTimer(Protocol):
    """Times one pipeline side and returns (result, seconds)."""

    def measure(
        self, fn: Callable[[], T], nbytes: int, stage: str, strategy: StrategyConfig
    ) -> tuple[T, float]: ...


class WallClockTimer:
    """Median-of-n wall-clock timing (default n=3).

    Stable throughput numbers need inputs of at least a few MiB; callers
    profiling for the store should size their corpus accordingly.
    """

    def __init__(self, repeats: int = 3) -> None:
        if repeats < 1:
            raise ValueError("repeats must be >= 1")
        self.repeats = repeats

    def measure(
        self, fn: Callable[[], T], nbytes: int, stage: str, strategy: StrategyConfig
    ) -> tuple[T, float]:
        durations = []
        result: T
        for _ in range(self.repeats):
            start = time.perf_counter()
            result = fn()
            durations.append(time.perf_counter() - start)
        # guard against timer resolution on tiny inputs
        return result, max(statistics.median(durations), 1e-12)


# per-byte stage costs in nanoseconds, keyed by config kind
_COST_TRANSFORM_NS = {"identity": 0.0, "delta_over_tokens": 0.05, "hadamard_over_channels": 0.45}
_COST_QUANT_NS = {"uniform_group": 0.30, "mixed_head": 0.36}
_COST_CODEC_ENC_NS = {"none": 0.10, "rle_bitpack": 0.90, "entropy": 55.0}
_COST_CODEC_DEC_NS = {"none": 0.08, "rle_bitpack": 0.55, "entropy": 60.0}


class CostModelTimer:
    """Deterministic timing: seconds = bytes * summed per-byte stage costs.

    The constants are plausible CPU-scale figures; what matters downstream is
    that they are a pure function of (strategy, stage, byte count), which
    makes every derived artifact reproducible bit-for-bit.
    """

    def __init__(self, scale: float = 1.0) -> None:
        if scale <= 0.0:
            raise ValueError("scale must be positive")
        self.scale = scale

    def _ns_per_byte(self, stage: str, strategy: StrategyConfig) -> float:
        codec = _COST_CODEC_ENC_NS if stage == "encode" else _COST_CODEC_DEC_NS
        return (
            _COST_TRANSFORM_NS[strategy.transform.kind]
            + _COST_QUANT_NS[strategy.quant.kind]
            + codec[strategy.codec.kind]
        )

    def measure(
        self, fn: Callable[[], T], nbytes: int, stage: str, strategy: StrategyConfig
    ) -> tuple[T, float]:
        result = fn()
        return result, self.scale * nbytes * self._ns_per_byte(stage, strategy) * 1e-9


def compress(
    x: KVTensor, s: StrategyConfig, timer: StageTimer | None = None
) -> tuple[CompressedBlob, PipelineMetrics]:
    """Run all three stages and measure the full profile.

    Returns the blob plus (cr, s_enc, s_dec, quality). The decode side is
    exercised here too, so the metrics are complete for profile-store use.
    """
    timer = timer if timer is not None else WallClockTimer()
    nbytes = x.nbytes_source

    def encode() -> CompressedBlob:
        transformed = apply_transform(x, s.transform)
        labels = classify_heads(x, s.quant.retrieval_fraction) if s.quant.kind == "mixed_head" else None
        return encode_lossless(quantize(transformed, s.quant, labels), s.codec)

    blob, enc_seconds = timer.measure(encode, nbytes, "encode", s)

    def decode() -> KVTensor:
        return invert_transform(dequantize(decode_lossless(blob, s.codec), s.quant), s.transform)

    reconstructed, dec_seconds = timer.measure(decode, nbytes, "decode", s)

    metrics = PipelineMetrics(
        cr=blob.cr,
        s_enc=nbytes / enc_seconds,
        s_dec=nbytes / dec_seconds,
        quality=quality_score(x, reconstructed),
    )
    return blob, metrics


def decompress(
    blob: CompressedBlob, s: StrategyConfig, timer: StageTimer | None = None
) -> tuple[KVTensor, float]:
    """Full inverse pipeline; returns the tensor and the decode throughput."""
    timer = timer if timer is not None else WallClockTimer()
    _check_blob_matches(blob, s)

    def decode() -> KVTensor:
        return invert_transform(dequantize(decode_lossless(blob, s.codec), s.quant), s.transform)

    reconstructed, dec_seconds = timer.measure(decode, blob.original_bytes, "decode", s)
    return reconstructed, blob.original_bytes / dec_seconds


def _check_blob_matches(blob: CompressedBlob, s: StrategyConfig) -> None:
    q = s.quant
    if blob.group_size != q.group_size:
        raise CodecError(f"blob group_size {blob.group_size} != strategy group_size {q.group_size}")
    if blob.mixed != (q.kind == "mixed_head"):
        raise CodecError(f"blob quantizer layout does not match strategy {s.id!r}")
    widths = set(blob.bits_per_head.reshape(-1).tolist())
    allowed = {q.high_bits, q.low_bits} if q.kind == "mixed_head" else {q.bits}
    if not widths <= allowed:
        raise CodecError(f"blob symbol widths {sorted(widths)} incompatible with strategy {s.id!r}")
