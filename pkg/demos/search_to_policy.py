"""
From strategy search to a bandwidth policy
==========================================

Profiles a strategy space against a synthetic corpus with the guided
search, keeps the Pareto-efficient feasible strategies, and turns them
into the piecewise policy the online controller uses: which profile is
optimal at which bandwidth, and below which bandwidth compression pays
at all.
"""

from __future__ import annotations

from kvpilot.control.envelope import build_policy_table, lookup
from kvpilot.control.latency import NO_COMPRESSION, Profile, ServiceContext, benefit_threshold
from kvpilot.pipeline.compress import CostModelTimer
from kvpilot.pipeline.tensors import generate_corpus
from kvpilot.profiling.pareto import ParetoPoint, pareto_frontier
from kvpilot.profiling.search import CorpusEvaluator, SearchBudget, run_search
from kvpilot.profiling.space import SpaceDef, enumerate_space

# A small space: 2 transforms x 3 bit widths x 2 group sizes x 2 codecs.
space = enumerate_space(
    SpaceDef(
        transforms=("identity", "hadamard_over_channels"),
        quant_kinds=("uniform_group",),
        bits=(2, 4, 8),
        group_sizes=(32, 64),
        codecs=("none", "rle_bitpack"),
    )
)
corpus = generate_corpus(count=8, seed=11, layers=2, heads=4, tokens=64, channels=64)
evaluator = CorpusEvaluator(corpus, sample_size=4, timer=CostModelTimer(), seed=11)

# The search evaluates candidates one at a time, steered by a Gaussian
# process over (accuracy, ratio); pruning and early stopping keep the
# evaluation count well under the space size.
budget = SearchBudget(acc_threshold=0.80, max_iterations=16, seed_count=4)
result = run_search(space, evaluator, budget, seed=11)
print(
    f"searched {len(result.observations)}/{len(space)} candidates, "
    f"{len(result.feasible)} feasible, stopped_early={result.stopped_early}"
)

# Pareto reduction: drop every feasible strategy that another one beats
# on accuracy, ratio, and latency at once.
points = [ParetoPoint(id=o.config_id, acc=o.acc, cr=o.cr, lat=o.lat) for o in result.feasible]
front = pareto_frontier(points)
print(f"pareto frontier keeps {len(front)} of {len(points)} feasible strategies:\n")

profiles = []
for i, point in enumerate(front):
    s_enc, s_dec = evaluator.throughputs[point.id]
    profiles.append(
        Profile(id=f"p{i:03d}", cr=point.cr, q=point.acc, s_enc=s_enc, s_dec=s_dec,
                strategy_id=point.id)
    )
for p in profiles:
    # benefit_threshold is the link bandwidth above which the raw
    # transfer beats this profile; compression only pays below it.
    print(
        f"  {p.id}  cr={p.cr:5.2f}  q={p.q:.3f}  s={p.s / 1e9:6.2f} GB/s"
        f"  pays below {benefit_threshold(p) / 1e9:6.2f} GB/s  ({p.strategy_id})"
    )

# The policy table is the lower envelope of the latency lines
# T(x) = 1/s + x/cr over x = 1/bandwidth, one envelope per quality
# bucket. Lookups are then a binary search, cheap enough for per-request
# use.
table = build_policy_table(profiles + [NO_COMPRESSION], bucket_floors=(0.80, 0.90))
print("\npolicy segments (quality floor 0.80 bucket):")
bucket = table.buckets[0.80]
for start, owner in zip(bucket.starts, bucket.profiles):
    print(f"  from 1/B = {start:.2e} s/B: {owner.id}")

print("\nper-bandwidth picks:")
for gbps in (0.05, 0.5, 2.0, 20.0, 200.0):
    c = ServiceContext(
        workload="chat", bandwidth=gbps * 1.25e8, t_slo=30.0, q_min=0.80,
        volume=2**30, t_model=1.0,
    )
    picked = lookup(table, c).optimal
    print(f"  {gbps:7.2f} Gbps -> {picked.id}  (cr={picked.cr:.2f}, q={picked.q:.3f})")
