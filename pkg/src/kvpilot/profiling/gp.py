"""Gaussian-process regression on accuracy over the strategy embedding.

Fixed squared-exponential kernel (no hyperparameter learning): the search
operates under tiny iteration budgets where stable, pre-set kernel scales
beat marginal-likelihood optimization. The prior mean is the mean of the
training targets, so far-field predictions revert to the observed average
rather than to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import cdist

_MAX_JITTER = 1e-4


@dataclass(frozen=True)
class GpParams:
    length_scale: float = 0.5
    signal_var: float = 0.05
    noise_var: float = 1e-4

    def __post_init__(self) -> None:
        if self.length_scale <= 0 or self.signal_var <= 0 or self.noise_var < 0:
            raise ValueError(f"invalid GP parameters: {self}")


@dataclass(frozen=True, eq=False)
class GpState:
    """Fitted state: Cholesky factor of K + noise*I plus solve products."""

    params: GpParams
    train_x: np.ndarray  # (n, d)
    y_mean: float
    chol_lower: np.ndarray  # (n, n)
    alpha: np.ndarray  # (n,) = (K + noise I)^-1 (y - y_mean)


def _kernel(params: GpParams, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    sq = cdist(a, b, metric="sqeuclidean")
    return params.signal_var * np.exp(-sq / (2.0 * params.length_scale**2))


def gp_fit(train_x: np.ndarray, train_y: np.ndarray, params: GpParams | None = None) -> GpState:
    """Fit by Cholesky with jitter escalation up to 1e-4.

    Raises numpy.linalg.LinAlgError if the kernel matrix stays non-PD at the
    maximum jitter.
    """
    params = params or GpParams()
    train_x = np.atleast_2d(np.asarray(train_x, dtype=np.float64))
    train_y = np.asarray(train_y, dtype=np.float64).reshape(-1)
    if train_x.shape[0] != train_y.shape[0]:
        raise ValueError(f"{train_x.shape[0]} embeddings vs {train_y.shape[0]} targets")
    if train_x.shape[0] == 0:
        raise ValueError("gp_fit needs at least one observation")

    gram = _kernel(params, train_x, train_x)
    identity = np.eye(train_x.shape[0])
    jitter = 0.0
    while True:
        try:
            lower = cholesky(gram + (params.noise_var + jitter) * identity, lower=True)
            break
        except np.linalg.LinAlgError:
            jitter = 1e-10 if jitter == 0.0 else jitter * 10.0
            if jitter > _MAX_JITTER:
                raise np.linalg.LinAlgError(
                    f"kernel matrix not positive definite at max jitter {_MAX_JITTER}"
                ) from None

    y_mean = float(train_y.mean())
    alpha = cho_solve((lower, True), train_y - y_mean)
    return GpState(params=params, train_x=train_x, y_mean=y_mean, chol_lower=lower, alpha=alpha)


def gp_predict(gp: GpState, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and standard deviation at one or more points.

    Accepts (d,) or (m, d); returns arrays of shape (m,). Variance is
    clamped at zero before the square root.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[1] != gp.train_x.shape[1]:
        raise ValueError(f"dimension mismatch: {points.shape[1]} vs {gp.train_x.shape[1]}")
    cross = _kernel(gp.params, points, gp.train_x)  # (m, n)
    mean = gp.y_mean + cross @ gp.alpha
    half = solve_triangular(gp.chol_lower, cross.T, lower=True)  # (n, m)
    variance = np.maximum(gp.params.signal_var - np.sum(half * half, axis=0), 0.0)
    return mean, np.sqrt(variance)
