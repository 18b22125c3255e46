from __future__ import annotations

import numpy as np
import pytest

from kvpilot.control.envelope import (
    DEFAULT_BUCKET_FLOORS,
    QualityError,
    bucket_for,
    build_policy_table,
    lookup,
    policy_table_export,
)
from kvpilot.control.latency import Profile, ServiceContext

P_FAST = Profile(id="p_fast", cr=8.0, s=1e9, q=0.95)
P_LIGHT = Profile(id="p_light", cr=2.0, s=1e10, q=0.95)


def _ctx(bandwidth, q_min=0.9, t_slo=30.0):
    return ServiceContext(
        workload="chat", bandwidth=bandwidth, t_slo=t_slo, q_min=q_min, volume=2**30, t_model=0.1
    )


def test_two_profile_breakpoint_worked_example():
    # lines 1e-9 + x/8 and 1e-10 + x/2 cross at x = 0.9e-9 / 0.375 = 2.4e-9
    table = build_policy_table([P_FAST, P_LIGHT], bucket_floors=(0.9,))
    env = table.buckets[0.9]
    assert [p.id for p in env.profiles] == ["p_light", "p_fast"]
    assert env.starts[0] == table.x_lo
    assert env.starts[1] == pytest.approx(2.4e-9, rel=1e-12)
    # the light profile wins above the crossover bandwidth
    assert lookup(table, _ctx(bandwidth=5e8)).optimal.id == "p_light"
    assert lookup(table, _ctx(bandwidth=4e8)).optimal.id == "p_fast"
    assert lookup(table, _ctx(bandwidth=1.0 / 2.4e-9 * 1.001)).optimal.id == "p_light"


def _grid_argmin(members, x):
    # linear scan with the documented tie rule
    def value(p):
        intercept = 0.0 if np.isinf(p.s) else 1.0 / p.s
        return intercept + x / p.cr

    return min(members, key=lambda p: (value(p), -p.q, -p.cr, p.id))


def test_lookup_matches_linear_scan_oracle_on_random_sets():
    rng = np.random.default_rng(7)
    for trial in range(5):
        members = [
            Profile(
                id=f"p{trial}_{i:02d}",
                cr=float(rng.uniform(1.0, 16.0)),
                s=float(10 ** rng.uniform(8.0, 10.5)),
                q=float(rng.uniform(0.9, 1.0)),
            )
            for i in range(rng.integers(8, 30))
        ]
        table = build_policy_table(members, bucket_floors=(0.9,))
        for x in np.linspace(table.x_lo, table.x_hi, 1000):
            got = lookup(table, _ctx(bandwidth=1.0 / x)).optimal
            want = _grid_argmin(members, x)
            assert got.id == want.id, f"x={x}: {got.id} != {want.id}"


def test_exact_breakpoint_tie_prefers_higher_quality():
    # dyadic intercepts make the crossover land exactly on x = 2^-28
    a = Profile(id="pa", cr=2.0, s=float(2**30), q=0.95)
    b = Profile(id="pb", cr=4.0, s=float(2**29), q=0.99)
    table = build_policy_table([a, b], bucket_floors=(0.9,))
    env = table.buckets[0.9]
    assert env.starts[1] == 2.0**-28
    assert lookup(table, _ctx(bandwidth=float(2**28))).optimal.id == "pb"

    # same geometry, quality flipped: the tie goes the other way
    a2 = Profile(id="pa", cr=2.0, s=float(2**30), q=0.99)
    b2 = Profile(id="pb", cr=4.0, s=float(2**29), q=0.95)
    table2 = build_policy_table([a2, b2], bucket_floors=(0.9,))
    assert lookup(table2, _ctx(bandwidth=float(2**28))).optimal.id == "pa"


def test_piecewise_constant_within_segments():
    table = build_policy_table([P_FAST, P_LIGHT], bucket_floors=(0.9,))
    env = table.buckets[0.9]
    x_break = env.starts[1]
    for x1, x2 in [(table.x_lo * 1.5, x_break * 0.99), (x_break * 1.01, table.x_hi * 0.9)]:
        first = lookup(table, _ctx(bandwidth=1.0 / x1)).optimal.id
        second = lookup(table, _ctx(bandwidth=1.0 / x2)).optimal.id
        assert first == second


def test_buckets_are_cumulative():
    profiles = [
        Profile(id="q98", cr=4.0, s=1e9, q=0.98),
        Profile(id="q995", cr=2.0, s=1e9, q=0.995),
    ]
    table = build_policy_table(profiles, bucket_floors=DEFAULT_BUCKET_FLOORS)
    for floor in (0.90, 0.95, 0.97):
        ids = {p.id for p in table.buckets[floor].profiles}
        assert "q98" in ids or "q995" in ids
        members = {p.id for p in profiles if p.q >= floor}
        assert {p.id for p in table.buckets[floor].profiles} <= members
    assert {p.id for p in table.buckets[0.99].profiles} == {"q995"}


def test_bucket_for_maps_to_lowest_adequate_floor():
    floors = DEFAULT_BUCKET_FLOORS
    assert bucket_for(0.0, floors) == 0.90
    assert bucket_for(0.90, floors) == 0.90
    assert bucket_for(0.93, floors) == 0.95
    assert bucket_for(0.99, floors) == 0.99
    with pytest.raises(QualityError):
        bucket_for(0.995, floors)


def test_lookup_raises_quality_error_above_all_floors():
    table = build_policy_table([P_FAST], bucket_floors=(0.9,))
    with pytest.raises(QualityError):
        lookup(table, _ctx(bandwidth=1e9, q_min=0.99))


def test_unreachable_floor_bucket_is_absent():
    table = build_policy_table([P_FAST], bucket_floors=(0.9, 0.99))
    assert 0.9 in table.buckets and 0.99 not in table.buckets
    with pytest.raises(QualityError):
        lookup(table, _ctx(bandwidth=1e9, q_min=0.97))


def test_out_of_range_bandwidth_clamps():
    table = build_policy_table([P_FAST, P_LIGHT], bucket_floors=(0.9,))
    huge = lookup(table, _ctx(bandwidth=1e15)).optimal
    assert huge.id == lookup(table, _ctx(bandwidth=1.0 / table.x_lo)).optimal.id
    tiny = lookup(table, _ctx(bandwidth=1.0)).optimal
    assert tiny.id == lookup(table, _ctx(bandwidth=1.0 / table.x_hi)).optimal.id


def test_candidate_set_has_at_most_three_distinct_profiles():
    rng = np.random.default_rng(3)
    members = [
        Profile(id=f"m{i:02d}", cr=float(rng.uniform(1, 16)), s=float(10 ** rng.uniform(8, 10.5)), q=0.95)
        for i in range(20)
    ]
    table = build_policy_table(members, bucket_floors=(0.9,))
    for bandwidth in 10 ** np.linspace(7.5, 10.5, 50):
        cs = lookup(table, _ctx(bandwidth=float(bandwidth)))
        ids = [p.id for p in cs.profiles]
        assert 1 <= len(ids) <= 3
        assert len(set(ids)) == len(ids)
        assert cs.profiles[0] is cs.optimal


def test_neighbors_are_adjacent_segment_owners():
    table = build_policy_table([P_FAST, P_LIGHT], bucket_floors=(0.9,))
    cs = lookup(table, _ctx(bandwidth=5e8))  # light-profile segment, fast adjacent
    assert cs.optimal.id == "p_light"
    assert [p.id for p in cs.neighbors] == ["p_fast"]


def test_coincident_lines_collapse_to_tie_winner():
    twin_a = Profile(id="zz", cr=4.0, s=1e9, q=0.95)
    twin_b = Profile(id="aa", cr=4.0, s=1e9, q=0.95)
    table = build_policy_table([twin_a, twin_b], bucket_floors=(0.9,))
    env = table.buckets[0.9]
    assert [p.id for p in env.profiles] == ["aa"]


def test_export_structure_and_bandwidth_conversion():
    table = build_policy_table([P_FAST, P_LIGHT], bucket_floors=(0.9,))
    doc = policy_table_export(table)
    assert doc["x_lo"] == table.x_lo and doc["x_hi"] == table.x_hi
    bucket = doc["buckets"][0]
    assert bucket["floor"] == 0.9
    segments = bucket["segments"]
    assert [seg["profile_id"] for seg in segments] == ["p_light", "p_fast"]
    assert segments[0]["x_hi"] == segments[1]["x_lo"]
    for seg in segments:
        assert seg["bandwidth_lo_bits_per_s"] == pytest.approx(8.0 / seg["x_hi"])
        assert seg["bandwidth_hi_bits_per_s"] == pytest.approx(8.0 / seg["x_lo"])


def test_build_validation():
    with pytest.raises(ValueError):
        build_policy_table([], bucket_floors=(0.9,))
    with pytest.raises(ValueError):
        build_policy_table([P_FAST], bucket_floors=())
    with pytest.raises(ValueError):
        build_policy_table([P_FAST], bucket_floors=(0.9,), x_lo=1e-7, x_hi=1e-11)
