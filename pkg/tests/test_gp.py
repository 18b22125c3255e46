from __future__ import annotations

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from kvpilot.profiling.gp import GpParams, gp_fit, gp_predict


def _dense_oracle(params, train_x, train_y, test_x):
    # direct solve of the textbook posterior, no Cholesky reuse
    def kern(a, b):
        return params.signal_var * np.exp(-cdist(a, b, "sqeuclidean") / (2 * params.length_scale**2))

    gram = kern(train_x, train_x) + params.noise_var * np.eye(len(train_x))
    cross = kern(test_x, train_x)
    y_mean = train_y.mean()
    inv = np.linalg.inv(gram)
    mean = y_mean + cross @ inv @ (train_y - y_mean)
    var = params.signal_var - np.sum((cross @ inv) * cross, axis=1)
    return mean, np.sqrt(np.maximum(var, 0.0))


def test_posterior_matches_dense_solve_oracle():
    rng = np.random.default_rng(0)
    params = GpParams()
    train_x = rng.uniform(0, 1, (20, 3))
    train_y = rng.uniform(0, 1, 20)
    test_x = rng.uniform(0, 1, (15, 3))
    gp = gp_fit(train_x, train_y, params)
    mean, sigma = gp_predict(gp, test_x)
    oracle_mean, oracle_sigma = _dense_oracle(params, train_x, train_y, test_x)
    np.testing.assert_allclose(mean, oracle_mean, atol=1e-9)
    np.testing.assert_allclose(sigma, oracle_sigma, atol=1e-9)


def test_near_interpolation_at_training_points():
    rng = np.random.default_rng(1)
    train_x = rng.uniform(0, 1, (10, 2))
    train_y = rng.uniform(0.4, 0.9, 10)
    gp = gp_fit(train_x, train_y)
    mean, sigma = gp_predict(gp, train_x)
    # small observation noise keeps predictions within a few percent
    np.testing.assert_allclose(mean, train_y, atol=0.05)
    assert np.all(sigma < 0.01)


def test_far_field_reverts_to_training_mean():
    rng = np.random.default_rng(2)
    train_x = rng.uniform(0, 1, (12, 2))
    train_y = rng.uniform(0, 1, 12)
    gp = gp_fit(train_x, train_y)
    mean, sigma = gp_predict(gp, np.full((1, 2), 100.0))
    assert mean[0] == pytest.approx(train_y.mean(), abs=1e-9)
    assert sigma[0] == pytest.approx(np.sqrt(gp.params.signal_var), abs=1e-9)


def test_uncertainty_shrinks_near_observations():
    train_x = np.array([[0.0, 0.0], [1.0, 1.0]])
    gp = gp_fit(train_x, np.array([0.5, 0.7]))
    _, sigma = gp_predict(gp, np.array([[0.0, 0.01], [0.5, 0.5], [3.0, 3.0]]))
    assert sigma[0] < sigma[1] < sigma[2]


def test_accepts_single_point_queries():
    gp = gp_fit(np.array([[0.0, 0.0]]), np.array([0.5]))
    mean, sigma = gp_predict(gp, np.array([0.0, 0.0]))
    assert mean.shape == (1,) and sigma.shape == (1,)


def test_duplicate_training_points_survive_via_jitter():
    x = np.zeros((5, 2))
    gp = gp_fit(x, np.full(5, 0.3), GpParams(noise_var=0.0))
    mean, _ = gp_predict(gp, np.zeros((1, 2)))
    assert mean[0] == pytest.approx(0.3, abs=1e-3)


def test_fit_validation_errors():
    with pytest.raises(ValueError):
        gp_fit(np.zeros((3, 2)), np.zeros(2))
    with pytest.raises(ValueError):
        gp_fit(np.zeros((0, 2)), np.zeros(0))
    gp = gp_fit(np.zeros((1, 2)), np.zeros(1))
    with pytest.raises(ValueError):
        gp_predict(gp, np.zeros((1, 3)))


def test_params_validation():
    with pytest.raises(ValueError):
        GpParams(length_scale=0.0)
    with pytest.raises(ValueError):
        GpParams(signal_var=-1.0)
    with pytest.raises(ValueError):
        GpParams(noise_var=-1e-9)
