"""Lossy-then-lossless KV-cache compression pipeline.

A compression strategy is the composition of three stages: an invertible
transform over the tensor, a per-group asymmetric quantizer (optionally with
mixed per-head bit widths), and a lossless codec over the quantized symbol
stream. All reconstruction error is attributable to the quantizer alone.
"""

from __future__ import annotations

from kvpilot.pipeline.codecs import CodecConfig, CompressedBlob, decode_lossless, encode_lossless
from kvpilot.pipeline.compress import (
    CostModelTimer,
    PipelineMetrics,
    WallClockTimer,
    compress,
    decompress,
)
from kvpilot.pipeline.quantize import QuantConfig, classify_heads, dequantize, quantize
from kvpilot.pipeline.strategy import StrategyConfig, parse_strategy_id
from kvpilot.pipeline.tensors import KVTensor, generate_kv_tensor, quality_score
from kvpilot.pipeline.transforms import TransformConfig, apply_transform, invert_transform

__all__ = [
    "CodecConfig",
    "CompressedBlob",
    "CostModelTimer",
    "KVTensor",
    "PipelineMetrics",
    "QuantConfig",
    "StrategyConfig",
    "TransformConfig",
    "WallClockTimer",
    "apply_transform",
    "classify_heads",
    "compress",
    "decode_lossless",
    "decompress",
    "dequantize",
    "encode_lossless",
    "generate_kv_tensor",
    "invert_transform",
    "parse_strategy_id",
    "quality_score",
    "quantize",
]
