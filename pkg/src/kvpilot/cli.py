"""Command-line entry point: profile, pareto, envelope, simulate, report.

Every command accepts --seed and is byte-deterministic under a fixed
(config, seed) pair: artifacts embed the config digest and the seed, and
re-running reproduces them exactly. The profile command defaults to the
cost-model timer for that reason; pass --timer wall to measure real
stage times at the price of nondeterministic throughput numbers.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys

from kvpilot.control.latency import NO_COMPRESSION, Profile
from kvpilot.control.envelope import build_policy_table, policy_table_export
from kvpilot.io.config import ConfigError, RunConfig, config_digest, parse_config
from kvpilot.io.report import FORMATS, emit_report
from kvpilot.io.store import STORE_PATH_ENV, ProfileStore, StoreError, load_profiles, store_profiles
from kvpilot.pipeline.compress import CostModelTimer, WallClockTimer
from kvpilot.pipeline.tensors import generate_corpus
from kvpilot.profiling.pareto import ParetoPoint, pareto_frontier
from kvpilot.profiling.search import ABLATIONS, CorpusEvaluator, run_search
from kvpilot.profiling.space import enumerate_space
from kvpilot.sim.engine import DriftModel, MODES, Scenario, run_scenario
from kvpilot.sim.trace import BandwidthTrace
from kvpilot.sim.workload import generate_requests

ARTIFACT_VERSION = 1

# Reference transfer volume for turning throughput into a latency
# objective and store profiles into Pareto points: 1 GiB.
V_REF = float(2**30)


class UsageError(Exception):
    """Missing or unusable inputs; maps to exit code 2."""


def _read_text(path: str, what: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return handle.read()
    except OSError as exc:
        raise UsageError(f"cannot read {what} {path!r}: {exc}") from None


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)


def _load_config(path: str | None) -> RunConfig:
    if not path:
        raise UsageError("--config is required")
    return parse_config(_read_text(path, "config"))


def _store_path(flag: str | None) -> str:
    path = flag or os.environ.get(STORE_PATH_ENV)
    if not path:
        raise UsageError(f"--store is required (or set {STORE_PATH_ENV})")
    return path


def _dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _cmd_profile(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    digest = config_digest(config)
    corpus = generate_corpus(
        config.corpus.count,
        seed=config.corpus.seed,
        layers=config.corpus.layers,
        heads=config.corpus.heads,
        tokens=config.corpus.tokens,
        channels=config.corpus.channels,
        outlier_fraction=config.corpus.outlier_fraction,
        outlier_scale=config.corpus.outlier_scale,
    )
    space = enumerate_space(config.space)
    timer = CostModelTimer() if args.timer == "cost" else WallClockTimer()
    evaluator = CorpusEvaluator(
        corpus, sample_size=config.corpus.sample_size, v_ref=V_REF, timer=timer, seed=args.seed
    )
    result = run_search(space, evaluator, config.budget, ablation=args.ablation, seed=args.seed)

    meta = {
        "version": ARTIFACT_VERSION,
        "config_digest": digest,
        "seed": args.seed,
        "ablation": args.ablation,
        "workload": config.workload,
        "space_size": len(space),
    }
    lines = [json.dumps(meta, sort_keys=True)]
    for rec in result.trace:
        lines.append(json.dumps(dataclasses.asdict(rec), sort_keys=True))
    trace_text = "\n".join(lines) + "\n"
    trace_digest = hashlib.sha256(trace_text.encode("utf-8")).hexdigest()[:16]

    points = [ParetoPoint(id=o.config_id, acc=o.acc, cr=o.cr, lat=o.lat) for o in result.feasible]
    front = pareto_frontier(points)
    profiles = []
    for i, point in enumerate(front):
        s_enc, s_dec = evaluator.throughputs[point.id]
        profiles.append(
            Profile(
                id=f"p{i:03d}",
                cr=point.cr,
                q=point.acc,
                s_enc=s_enc,
                s_dec=s_dec,
                strategy_id=point.id,
            )
        )
    store = ProfileStore(
        profiles=tuple(profiles),
        workload=config.workload,
        trace_digest=trace_digest,
        config_digest=digest,
        seed=args.seed,
    )
    store_profiles(store, args.out)
    trace_path = args.trace or args.out + ".trace.jsonl"
    _write_text(trace_path, trace_text)
    print(
        f"profile: evaluated {len(result.observations)}/{len(space)} candidates, "
        f"{len(result.feasible)} feasible, stored {len(profiles)} pareto profiles -> {args.out}"
    )
    return 0


def _cmd_pareto(args: argparse.Namespace) -> int:
    store = load_profiles(_store_path(args.store))
    points = [
        ParetoPoint(id=p.id, acc=p.q, cr=p.cr, lat=0.0 if p.s == float("inf") else V_REF / p.s)
        for p in store.profiles
    ]
    front = pareto_frontier(points)
    keep = {point.id for point in front}
    filtered = ProfileStore(
        profiles=tuple(p for p in store.profiles if p.id in keep),
        workload=store.workload,
        trace_digest=store.trace_digest,
        config_digest=store.config_digest,
        seed=store.seed,
    )
    store_profiles(filtered, args.out)
    print(f"pareto: kept {len(filtered.profiles)}/{len(store.profiles)} profiles -> {args.out}")
    return 0


def _envelope_profiles(store: ProfileStore) -> tuple[Profile, ...]:
    profiles = tuple(store.profiles)
    if all(p.s != float("inf") for p in profiles):
        profiles = profiles + (NO_COMPRESSION,)
    return profiles


def _cmd_envelope(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    store = load_profiles(_store_path(args.store))
    table = build_policy_table(
        _envelope_profiles(store),
        bucket_floors=config.envelope.bucket_floors,
        x_lo=config.envelope.x_lo,
        x_hi=config.envelope.x_hi,
    )
    doc = {
        "version": ARTIFACT_VERSION,
        "config_digest": config_digest(config),
        "seed": args.seed,
        "workload": store.workload,
        "table": policy_table_export(table),
    }
    _write_text(args.out, _dump_json(doc))
    print(f"envelope: {len(table.buckets)} bucket(s) over [{table.x_lo!r}, {table.x_hi!r}] -> {args.out}")
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    if args.scenario not in config.scenarios:
        known = sorted(config.scenarios)
        raise UsageError(f"unknown scenario {args.scenario!r}; config defines {known}")
    sc = config.scenarios[args.scenario]
    if args.mode:
        sc = dataclasses.replace(sc, mode=args.mode)

    if args.store or os.environ.get(STORE_PATH_ENV):
        store = load_profiles(_store_path(args.store))
        profiles = _envelope_profiles(store)
    elif sc.mode == "no_compression":
        profiles = ()
    else:
        raise UsageError(f"--store is required for mode {sc.mode!r} (or set {STORE_PATH_ENV})")

    requests = generate_requests(
        sc.requests.specs(),
        count=sc.requests.count,
        mean_interarrival=sc.requests.mean_interarrival,
        start=sc.requests.start,
        seed=args.seed,
    )
    trace = BandwidthTrace(
        times=tuple(t for t, _ in sc.trace), rates=tuple(r for _, r in sc.trace)
    )
    scenario = Scenario(
        requests=requests,
        trace=trace,
        profiles=profiles,
        kind=sc.kind,
        mode=sc.mode,
        drift=DriftModel(factors=dict(sc.drift_factors), overheads=dict(sc.drift_overheads)),
        bandit_params=config.bandit,
        fixed_profile_id=sc.fixed_profile_id,
        recompute_seconds=sc.recompute_seconds,
        seed=args.seed,
    )
    metrics, _ = run_scenario(scenario)
    doc = {
        "version": ARTIFACT_VERSION,
        "config_digest": config_digest(config),
        "seed": args.seed,
        "scenario": args.scenario,
        "kind": sc.kind,
        "mode": sc.mode,
        "summary": {
            "count": len(metrics.records),
            "mean_jct": metrics.mean_jct,
            "p50_jct": metrics.p50_jct,
            "p99_jct": metrics.p99_jct,
            "mean_ttft": metrics.mean_ttft,
            "violation_rate": metrics.violation_rate,
        },
        "stage_shares": metrics.stage_shares,
        "requests": [
            {
                "request_id": r.request_id,
                "workload": r.workload,
                "arrival": r.arrival,
                "profile_id": r.profile_id,
                "reason": r.reason,
                "explored": r.explored,
                "recomputed": r.recomputed,
                "predicted": r.predicted,
                "stages": r.stages.as_dict(),
                "ttft": r.ttft,
                "jct": r.jct,
                "t_slo": r.t_slo,
                "violated": r.violated,
            }
            for r in metrics.records
        ],
    }
    _write_text(args.out, _dump_json(doc))
    print(
        f"simulate: {args.scenario} mode={sc.mode} requests={len(metrics.records)} "
        f"mean_jct={metrics.mean_jct:.6f} violation_rate={metrics.violation_rate:.4f} -> {args.out}"
    )
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    try:
        doc = json.loads(_read_text(args.metrics, "metrics"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"metrics file is not valid JSON: {exc}") from None
    text = emit_report(doc, args.format)
    if args.out:
        _write_text(args.out, text)
        print(f"report: {args.format} -> {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kvpilot",
        description="Profile compression strategies, build policy tables, and simulate serving.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="search the strategy space and write the profile store")
    p.add_argument("--config", required=True, help="run config path (JSON)")
    p.add_argument("--out", required=True, help="output profile store path")
    p.add_argument("--trace", help="output search trace path (default: <out>.trace.jsonl)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ablation", choices=ABLATIONS, default="none")
    p.add_argument("--timer", choices=("cost", "wall"), default="cost",
                   help="'cost' is deterministic; 'wall' measures real stage times")
    p.set_defaults(func=_cmd_profile)

    p = sub.add_parser("pareto", help="filter a profile store to its Pareto frontier")
    p.add_argument("--store", help=f"input store path (default: ${STORE_PATH_ENV})")
    p.add_argument("--out", required=True, help="output store path")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_pareto)

    p = sub.add_parser("envelope", help="build and export the quality-bucketed policy table")
    p.add_argument("--config", required=True)
    p.add_argument("--store", help=f"input store path (default: ${STORE_PATH_ENV})")
    p.add_argument("--out", required=True, help="output policy table path (JSON)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_envelope)

    p = sub.add_parser("simulate", help="run one configured scenario and write metrics")
    p.add_argument("--config", required=True)
    p.add_argument("--scenario", required=True, help="scenario name from the config")
    p.add_argument("--store", help=f"input store path (default: ${STORE_PATH_ENV})")
    p.add_argument("--out", required=True, help="output metrics path (JSON)")
    p.add_argument("--mode", choices=MODES, help="override the scenario's controller mode")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("report", help="render tables from a metrics artifact")
    p.add_argument("--metrics", required=True, help="metrics JSON path from simulate")
    p.add_argument("--format", choices=FORMATS, default="table")
    p.add_argument("--out", help="write here instead of stdout")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, StoreError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
