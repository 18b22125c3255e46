from __future__ import annotations

import numpy as np
import pytest

from kvpilot.pipeline.tensors import KVTensor, generate_corpus, generate_kv_tensor, quality_score


def test_generated_tensor_shape_and_dtype():
    t = generate_kv_tensor(layers=3, heads=5, tokens=16, channels=32, seed=1)
    assert t.values.shape == (3, 5, 16, 32)
    assert t.values.dtype == np.float32
    assert np.all(np.isfinite(t.values))
    assert t.layers == 3 and t.heads == 5 and t.tokens == 16 and t.channels == 32
    assert t.nbytes_source == 3 * 5 * 16 * 32 * 2
    assert t.head_importance.shape == (3, 5)
    assert np.all((t.head_importance >= 0.0) & (t.head_importance <= 1.0))


def test_generation_is_seed_deterministic():
    a = generate_kv_tensor(seed=7)
    b = generate_kv_tensor(seed=7)
    c = generate_kv_tensor(seed=8)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.head_importance, b.head_importance)
    assert not np.array_equal(a.values, c.values)


def test_outlier_channels_carry_larger_scale():
    t = generate_kv_tensor(tokens=256, channels=64, seed=0, outlier_fraction=0.05, outlier_scale=10.0)
    spread = np.abs(t.values).mean(axis=2)  # (L, H, C)
    top = np.sort(spread, axis=-1)[..., -1]
    median = np.median(spread, axis=-1)
    assert np.all(top > 3.0 * median)


def test_corpus_uses_independent_child_seeds():
    corpus = generate_corpus(4, seed=0, tokens=8)
    assert len(corpus) == 4
    for i in range(len(corpus)):
        for j in range(i + 1, len(corpus)):
            assert not np.array_equal(corpus[i].values, corpus[j].values)
    again = generate_corpus(4, seed=0, tokens=8)
    for a, b in zip(corpus, again):
        assert np.array_equal(a.values, b.values)


def test_tensor_validation():
    with pytest.raises(ValueError):
        KVTensor(values=np.zeros((2, 2, 2), dtype=np.float32))
    bad = np.zeros((1, 1, 2, 2), dtype=np.float32)
    bad[0, 0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        KVTensor(values=bad)
    with pytest.raises(ValueError):
        KVTensor(
            values=np.zeros((2, 2, 2, 2), dtype=np.float32),
            head_importance=np.zeros((3, 2)),
        )


def test_quality_score_exact_and_degenerate_rules():
    t = generate_kv_tensor(seed=0)
    assert quality_score(t, t) == 1.0
    # sub-threshold reconstruction error still counts as exact
    nudged = t.with_values(t.values + np.float32(1e-10))
    assert quality_score(t, nudged) == 1.0
    zero = t.with_values(np.zeros_like(t.values))
    assert quality_score(zero, zero.with_values(np.ones_like(t.values))) == 0.0


def test_quality_score_orders_reconstructions_and_clamps():
    t = generate_kv_tensor(seed=3)
    rng = np.random.default_rng(0)
    small = t.with_values(t.values + rng.normal(0, 0.01, t.values.shape).astype(np.float32))
    large = t.with_values(t.values + rng.normal(0, 0.5, t.values.shape).astype(np.float32))
    q_small, q_large = quality_score(t, small), quality_score(t, large)
    assert 0.0 < q_large < q_small < 1.0
    garbage = t.with_values((t.values * 1000).astype(np.float32))
    assert quality_score(t, garbage) == 0.0
    with pytest.raises(ValueError):
        quality_score(t, generate_kv_tensor(tokens=32, seed=0))
