"""Constraint-aware Bayesian search over the strategy space.

The profiling engine enumerates a finite strategy space, embeds it (one-hot
categorical blocks plus min-max-scaled numeric axes), fits a Gaussian
process to observed accuracy, and walks the space with a feasibility-aware
acquisition function, bi-directional pruning, and early stopping. The
feasible survivors are reduced to a 3D Pareto frontier over
(accuracy, compression ratio, latency).
"""

from __future__ import annotations

from kvpilot.profiling.gp import GpParams, GpState, gp_fit, gp_predict
from kvpilot.profiling.pareto import ParetoPoint, pareto_frontier
from kvpilot.profiling.search import (
    Observation,
    SearchBudget,
    SearchResult,
    TraceRecord,
    acquisition_score,
    check_early_stop,
    exploration_weight,
    CorpusEvaluator,
    make_corpus_evaluator,
    prune_space,
    run_search,
)
from kvpilot.profiling.space import SpaceDef, StrategySpace, encode_config, enumerate_space

__all__ = [
    "GpParams",
    "GpState",
    "Observation",
    "ParetoPoint",
    "SearchBudget",
    "SearchResult",
    "SpaceDef",
    "StrategySpace",
    "TraceRecord",
    "acquisition_score",
    "check_early_stop",
    "encode_config",
    "enumerate_space",
    "exploration_weight",
    "gp_fit",
    "gp_predict",
    "CorpusEvaluator",
    "make_corpus_evaluator",
    "pareto_frontier",
    "prune_space",
    "run_search",
]
