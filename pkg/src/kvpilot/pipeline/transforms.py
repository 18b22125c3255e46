"""Invertible pre-quantization transforms.

Three kinds are supported:

- ``identity``: no-op.
- ``delta_over_tokens``: first-order differencing along the token axis;
  token 0 of every (layer, head) slab is kept verbatim as the anchor.
- ``hadamard_over_channels``: the orthonormal (1/sqrt(n)-scaled)
  Walsh-Hadamard transform along the channel axis. Being orthonormal it is
  its own inverse and requires a power-of-two channel count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from kvpilot.pipeline.tensors import KVTensor

TRANSFORM_KINDS = ("identity", "delta_over_tokens", "hadamard_over_channels")


@dataclass(frozen=True)
class TransformConfig:
    kind: str = "identity"

    def __post_init__(self) -> None:
        if self.kind not in TRANSFORM_KINDS:
            raise ValueError(f"unknown transform kind {self.kind!r}; expected one of {TRANSFORM_KINDS}")


def _fwht(values: np.ndarray) -> np.ndarray:
    """Fast Walsh-Hadamard transform along the last axis, natural ordering.

    Unnormalized butterfly; applying it twice multiplies by n.
    """
    n = values.shape[-1]
    out = np.array(values, dtype=np.float64)
    h = 1
    while h < n:
        shaped = out.reshape(*out.shape[:-1], n // (2 * h), 2, h)
        top = shaped[..., 0, :] + shaped[..., 1, :]
        bottom = shaped[..., 0, :] - shaped[..., 1, :]
        out = np.stack([top, bottom], axis=-2).reshape(out.shape)
        h *= 2
    return out


def apply_transform(x: KVTensor, t: TransformConfig) -> KVTensor:
    """Run one transform stage. Pure; never mutates ``x``."""
    if t.kind == "identity":
        return x
    if t.kind == "delta_over_tokens":
        values = x.values
        delta = np.concatenate([values[:, :, :1, :], np.diff(values, axis=2)], axis=2)
        return x.with_values(delta)
    if t.kind == "hadamard_over_channels":
        n = x.channels
        if n & (n - 1) != 0:
            raise ValueError(f"hadamard_over_channels needs power-of-two channels, got {n}")
        scaled = _fwht(x.values) / np.sqrt(n)
        return x.with_values(scaled.astype(np.float32))
    raise AssertionError(t.kind)


def invert_transform(y: KVTensor, t: TransformConfig) -> KVTensor:
    """Inverse of :func:`apply_transform` with the same config."""
    if t.kind == "identity":
        return y
    if t.kind == "delta_over_tokens":
        return y.with_values(np.cumsum(y.values, axis=2, dtype=np.float64).astype(np.float32))
    if t.kind == "hadamard_over_channels":
        # orthonormal involution: the forward pass is its own inverse
        return apply_transform(y, t)
    raise AssertionError(t.kind)
