"""Constraint-aware Bayesian search over an enumerated strategy space.

One iteration: fit the GP on all observations, score every remaining
candidate with the acquisition function, evaluate the argmax, then prune
bi-directionally around the fresh result and check the early-stop rule.
The search never evaluates the same candidate twice.

Ablation switches mirror the engine's components: ``enc`` replaces the
structural embedding with a random-index embedding, ``exp`` pins the
exploration weight to zero, ``prune`` disables pruning, ``stop`` disables
early stopping.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from kvpilot.pipeline.compress import StageTimer, compress
from kvpilot.pipeline.strategy import StrategyConfig
from kvpilot.pipeline.tensors import KVTensor
from kvpilot.profiling.gp import GpParams, gp_fit, gp_predict
from kvpilot.profiling.space import StrategySpace, halton_seed_indices

ABLATIONS = ("none", "enc", "exp", "prune", "stop")

Evaluator = Callable[[StrategyConfig], tuple[float, float, float]]


@dataclass(frozen=True)
class SearchBudget:
    """Search knobs: feasibility threshold, pruning slack, stop rules, schedule."""

    acc_threshold: float = 0.90
    eps_buffer: float = 0.25
    max_iterations: int = 100
    failure_limit: int = 8
    lambda0: float = 1.0
    tau: float = 10.0
    hard_gap: float = 0.10
    seed_count: int = 5

    def __post_init__(self) -> None:
        if not 0.0 < self.acc_threshold <= 1.0:
            raise ValueError(f"acc_threshold must be in (0, 1], got {self.acc_threshold}")
        for name in ("eps_buffer", "max_iterations", "failure_limit", "lambda0", "tau", "hard_gap", "seed_count"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class Observation:
    """One evaluated candidate."""

    index: int
    config_id: str
    acc: float
    cr: float
    lat: float


@dataclass(frozen=True)
class TraceRecord:
    """Per-evaluation search state, in emission order.

    Seed evaluations carry iteration 0 and null lambda/acquisition values.
    ``remaining_count`` is taken after pruning.
    """

    iteration: int
    config_id: str
    lambda_t: float | None
    acq_score: float | None
    acc: float
    cr: float
    lat: float
    remaining_count: int
    k_fail: int
    pruned_count: int


@dataclass(frozen=True)
class SearchResult:
    feasible: tuple[Observation, ...]
    observations: tuple[Observation, ...]
    trace: tuple[TraceRecord, ...]
    stopped_early: bool
    diagnostic: str

    @property
    def best_feasible(self) -> Observation | None:
        return max(self.feasible, key=lambda o: (o.cr, -o.index), default=None)


def exploration_weight(t: int, lambda0: float = 1.0, tau: float = 10.0) -> float:
    """Exponentially decaying exploration weight lambda_t = lambda0 * exp(-t/tau)."""
    if t < 1:
        raise ValueError(f"iteration must be >= 1, got {t}")
    return lambda0 * math.exp(-t / tau)


def _norm_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def acquisition_score(
    mean: float,
    sigma: float,
    lambda_t: float,
    acc_threshold: float,
    cr_estimate: float,
    sigma_max: float,
) -> float:
    """Feasibility-weighted exploitation plus normalized-uncertainty exploration.

    score = cr_estimate * P(acc >= threshold) + lambda_t * sigma/sigma_max.
    A zero-sigma posterior collapses the probability to an indicator; a zero
    sigma_max (all remaining candidates fully resolved) zeroes the
    exploration term.
    """
    if sigma > 0.0:
        p_feasible = _norm_cdf((mean - acc_threshold) / sigma)
    else:
        p_feasible = 1.0 if mean >= acc_threshold else 0.0
    sigma_norm = sigma / sigma_max if sigma_max > 0.0 else 0.0
    return cr_estimate * p_feasible + lambda_t * sigma_norm


def prune_space(
    remaining: np.ndarray,
    result_acc: float,
    result_cr: float,
    cr_estimates: np.ndarray,
    acc_threshold: float,
    eps_buffer: float,
    hard_gap: float = 0.10,
) -> tuple[np.ndarray, int]:
    """Bi-directional pruning around one evaluation result.

    Feasible result: drop remaining candidates whose estimated CR trails the
    achieved CR by more than the buffer (the search only moves upward).
    Clearly infeasible result (below threshold minus hard_gap): drop
    remaining candidates estimated to compress even harder.
    Returns the updated mask and the number of candidates removed.
    """
    updated = remaining.copy()
    if result_acc >= acc_threshold:
        drop = updated & (cr_estimates < result_cr - eps_buffer)
    elif result_acc < acc_threshold - hard_gap:
        drop = updated & (cr_estimates > result_cr + eps_buffer)
    else:
        return updated, 0
    updated &= ~drop
    return updated, int(drop.sum())


def check_early_stop(remaining_count: int, k_fail: int, failure_limit: int) -> bool:
    """Stop when the space is exhausted or failures run too long in a row."""
    return remaining_count == 0 or k_fail >= failure_limit


def _random_index_embedding(n: int, rng: np.random.Generator) -> np.ndarray:
    # structure-free encoding: a shuffled 1-D index, min-max scaled
    permutation = rng.permutation(n).astype(np.float64)
    if n > 1:
        permutation /= n - 1
    return permutation[:, None]


def run_search(
    space: StrategySpace,
    evaluate: Evaluator,
    budget: SearchBudget | None = None,
    *,
    ablation: str = "none",
    gp_params: GpParams | None = None,
    seed: int = 0,
) -> SearchResult:
    """Run the full search loop and return the feasible set plus its trace.

    ``evaluate`` maps a strategy to measured (acc, cr, lat); injecting it
    decouples the search from the tensor pipeline (oracles, cached corpora,
    and real evaluators all fit the same signature).
    """
    if ablation not in ABLATIONS:
        raise ValueError(f"ablation must be one of {ABLATIONS}, got {ablation!r}")
    budget = budget or SearchBudget()
    rng = np.random.default_rng(seed)

    n = len(space)
    if n == 0:
        raise ValueError("cannot search an empty space")
    embeddings = _random_index_embedding(n, rng) if ablation == "enc" else space.embeddings
    cr_estimates = space.cr_estimates

    remaining = np.ones(n, dtype=bool)
    observations: list[Observation] = []
    feasible: list[Observation] = []
    trace: list[TraceRecord] = []
    k_fail = 0
    stopped_early = False

    def run_one(index: int) -> Observation:
        acc, cr, lat = evaluate(space.candidates[index])
        return Observation(index=index, config_id=space.candidates[index].id, acc=acc, cr=cr, lat=lat)

    def book(obs: Observation) -> None:
        nonlocal k_fail
        observations.append(obs)
        if obs.acc >= budget.acc_threshold:
            feasible.append(obs)
            k_fail = 0
        else:
            k_fail += 1

    # ---- quasi-random seeding -------------------------------------------
    for index in halton_seed_indices(embeddings, min(budget.seed_count, budget.max_iterations)):
        obs = run_one(index)
        remaining[index] = False
        book(obs)
        trace.append(
            TraceRecord(
                iteration=0,
                config_id=obs.config_id,
                lambda_t=None,
                acq_score=None,
                acc=obs.acc,
                cr=obs.cr,
                lat=obs.lat,
                remaining_count=int(remaining.sum()),
                k_fail=k_fail,
                pruned_count=0,
            )
        )

    # ---- fit / acquire / evaluate / prune / stop loop -------------------
    iteration = 0
    while len(observations) < budget.max_iterations:
        if not remaining.any():
            stopped_early = True
            break
        iteration += 1

        train_x = embeddings[[o.index for o in observations]]
        train_y = np.asarray([o.acc for o in observations])
        gp = gp_fit(train_x, train_y, gp_params)

        lambda_t = 0.0 if ablation == "exp" else exploration_weight(iteration, budget.lambda0, budget.tau)
        indices = np.flatnonzero(remaining)
        means, sigmas = gp_predict(gp, embeddings[indices])
        sigma_max = float(sigmas.max())
        scores = [
            acquisition_score(
                float(means[k]), float(sigmas[k]), lambda_t, budget.acc_threshold,
                float(cr_estimates[indices[k]]), sigma_max,
            )
            for k in range(len(indices))
        ]
        pick = int(indices[int(np.argmax(scores))])  # first maximum: smallest index wins ties

        obs = run_one(pick)
        remaining[pick] = False
        book(obs)

        pruned_count = 0
        if ablation != "prune":
            remaining, pruned_count = prune_space(
                remaining, obs.acc, obs.cr, cr_estimates,
                budget.acc_threshold, budget.eps_buffer, budget.hard_gap,
            )

        trace.append(
            TraceRecord(
                iteration=iteration,
                config_id=obs.config_id,
                lambda_t=lambda_t,
                acq_score=float(np.max(scores)),
                acc=obs.acc,
                cr=obs.cr,
                lat=obs.lat,
                remaining_count=int(remaining.sum()),
                k_fail=k_fail,
                pruned_count=pruned_count,
            )
        )

        if ablation != "stop" and check_early_stop(int(remaining.sum()), k_fail, budget.failure_limit):
            stopped_early = True
            break

    diagnostic = (
        f"{len(feasible)} feasible of {len(observations)} evaluated"
        if feasible
        else f"no feasible configuration found in {len(observations)} evaluations"
    )
    return SearchResult(
        feasible=tuple(feasible),
        observations=tuple(observations),
        trace=tuple(trace),
        stopped_early=stopped_early,
        diagnostic=diagnostic,
    )


# --------------------------------------------------------------------------
# corpus-backed evaluator
# --------------------------------------------------------------------------


def _stable_hash(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


class CorpusEvaluator:
    """Evaluate strategies on a seeded subsample of the corpus.

    acc is the mean quality score, cr the mean measured ratio, and
    lat = v_ref / s_p with s_p pooled over the sample (total bytes over
    total per-side time, harmonically combined). The subsample depends only
    on (seed, strategy id), so results are reproducible regardless of
    evaluation order. ``throughputs`` keeps the pooled (s_enc, s_dec) pair
    per evaluated strategy id for downstream profile construction.
    """

    def __init__(
        self,
        corpus: Sequence[KVTensor],
        sample_size: int = 8,
        v_ref: float = float(2**30),
        timer: StageTimer | None = None,
        seed: int = 0,
    ) -> None:
        if sample_size < 1:
            raise ValueError("sample_size must be >= 1")
        if len(corpus) < sample_size:
            raise ValueError(f"corpus has {len(corpus)} tensors, need >= {sample_size}")
        self.corpus = corpus
        self.sample_size = sample_size
        self.v_ref = v_ref
        self.timer = timer
        self.seed = seed
        self.throughputs: dict[str, tuple[float, float]] = {}

    def __call__(self, strategy: StrategyConfig) -> tuple[float, float, float]:
        rng = np.random.default_rng([self.seed, _stable_hash(strategy.id)])
        picks = rng.choice(len(self.corpus), size=self.sample_size, replace=False)
        total_bytes = 0.0
        enc_seconds = 0.0
        dec_seconds = 0.0
        accs = []
        crs = []
        for tensor_index in picks:
            tensor = self.corpus[int(tensor_index)]
            _, metrics = compress(tensor, strategy, self.timer)
            accs.append(metrics.quality)
            crs.append(metrics.cr)
            total_bytes += tensor.nbytes_source
            enc_seconds += tensor.nbytes_source / metrics.s_enc
            dec_seconds += tensor.nbytes_source / metrics.s_dec
        s_enc = total_bytes / enc_seconds
        s_dec = total_bytes / dec_seconds
        s_p = s_enc * s_dec / (s_enc + s_dec)
        self.throughputs[strategy.id] = (s_enc, s_dec)
        return float(np.mean(accs)), float(np.mean(crs)), float(self.v_ref / s_p)


def make_corpus_evaluator(
    corpus: Sequence[KVTensor],
    sample_size: int = 8,
    v_ref: float = float(2**30),
    timer: StageTimer | None = None,
    seed: int = 0,
) -> CorpusEvaluator:
    return CorpusEvaluator(corpus, sample_size=sample_size, v_ref=v_ref, timer=timer, seed=seed)
