"""KV tensor container, synthetic generator, and the quality proxy.

A KV tensor is a 4-D array of attention key/value states laid out as
(layers, heads, tokens, channels), stored in float32 but accounted at a
declared 16-bit source width (2 bytes per element) for compression-ratio
purposes, mirroring half-precision serving caches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SOURCE_WIDTH_BYTES = 2  # declared 16-bit source precision for CR accounting

# Reconstructions closer than this RMSE count as exact.
_EXACT_RMSE = 1e-9


@dataclass(frozen=True, eq=False)
class KVTensor:
    """One KV cache block.

    Attributes:
        values: float array of shape (layers, heads, tokens, channels).
        head_importance: per-(layer, head) score in [0, 1], shape
            (layers, heads). Higher means more retrieval-critical.
    """

    values: np.ndarray
    head_importance: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim != 4:
            raise ValueError(f"values must be 4-D (layers, heads, tokens, channels), got shape {values.shape}")
        if min(values.shape) < 1:
            raise ValueError(f"all dims must be >= 1, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        importance = self.head_importance
        if importance is None:
            importance = np.zeros(values.shape[:2], dtype=np.float64)
        else:
            importance = np.asarray(importance, dtype=np.float64).reshape(values.shape[:2])
            if importance.min() < 0.0 or importance.max() > 1.0:
                raise ValueError("head_importance must lie in [0, 1]")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "head_importance", importance)

    @property
    def layers(self) -> int:
        return self.values.shape[0]

    @property
    def heads(self) -> int:
        return self.values.shape[1]

    @property
    def tokens(self) -> int:
        return self.values.shape[2]

    @property
    def channels(self) -> int:
        return self.values.shape[3]

    @property
    def nbytes_source(self) -> int:
        """Byte count at the declared 16-bit source width."""
        return self.values.size * SOURCE_WIDTH_BYTES

    def with_values(self, values: np.ndarray) -> KVTensor:
        """Same head metadata, new values (shape-checked by the constructor)."""
        return KVTensor(values=values, head_importance=self.head_importance)


def generate_kv_tensor(
    layers: int = 4,
    heads: int = 8,
    tokens: int = 64,
    channels: int = 64,
    seed: int = 0,
    outlier_fraction: float = 0.01,
    outlier_scale: float = 10.0,
) -> KVTensor:
    """Draw one synthetic KV tensor.

    Values are Gaussian per (layer, head, channel) with channel-dependent
    scales drawn log-normal; a small fraction of channels are outliers with
    scale inflated by ``outlier_scale``. Head importance is uniform in [0, 1].
    Everything is a deterministic function of ``seed``.
    """
    rng = np.random.default_rng(seed)
    scales = rng.lognormal(mean=0.0, sigma=0.5, size=(layers, heads, channels))
    n_outliers = max(1, round(outlier_fraction * channels))
    for layer in range(layers):
        for head in range(heads):
            hot = rng.choice(channels, size=n_outliers, replace=False)
            scales[layer, head, hot] *= outlier_scale
    noise = rng.standard_normal(size=(layers, heads, tokens, channels))
    values = (noise * scales[:, :, None, :]).astype(np.float32)
    importance = rng.uniform(0.0, 1.0, size=(layers, heads))
    return KVTensor(values=values, head_importance=importance)


def generate_corpus(count: int, seed: int = 0, **shape_kwargs) -> list[KVTensor]:
    """A list of tensors from independent per-tensor seeds derived from ``seed``."""
    root = np.random.default_rng(seed)
    child_seeds = root.integers(0, 2**31 - 1, size=count)
    return [generate_kv_tensor(seed=int(s), **shape_kwargs) for s in child_seeds]


def quality_score(original: KVTensor, reconstructed: KVTensor) -> float:
    """Normalized-RMSE quality proxy in [0, 1].

    q = max(0, 1 - RMSE(rec, orig) / RMS(orig)), with q = 1.0 exactly when
    the reconstruction is bit-identical up to an RMSE of 1e-9. This is a
    tensor-level stand-in for task accuracy; callers that have a real
    evaluator can inject it wherever a quality function is accepted.
    """
    a = original.values
    b = reconstructed.values
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = a.astype(np.float64) - b.astype(np.float64)
    rmse = math.sqrt(float(np.mean(diff * diff)))
    if rmse <= _EXACT_RMSE:
        return 1.0
    rms = math.sqrt(float(np.mean(a.astype(np.float64) ** 2)))
    if rms == 0.0:
        return 0.0
    return max(0.0, 1.0 - rmse / rms)
