"""kvpilot: service-aware KV-cache compression decision stack.

The package is organized as four library layers plus a thin IO surface:

- :mod:`kvpilot.pipeline` - lossy-then-lossless compression of synthetic
  KV tensors (transform, group quantization, lossless codec) with measured
  compression ratio, throughput, and a quality proxy.
- :mod:`kvpilot.profiling` - constraint-aware Bayesian search over the
  strategy space and the 3D Pareto frontier of the feasible set.
- :mod:`kvpilot.control` - the analytic latency model, benefit thresholds,
  quality-bucketed lower-envelope policy tables, and the residual-corrected
  epsilon-greedy profile selector.
- :mod:`kvpilot.sim` - a deterministic discrete-event simulator of
  PD-separated and prefix-caching serving over bandwidth traces.

:mod:`kvpilot.config`, :mod:`kvpilot.store`, :mod:`kvpilot.report`, and
:mod:`kvpilot.cli` tie the layers into reproducible file-based runs.
"""

from __future__ import annotations

__version__ = "0.1.0"
