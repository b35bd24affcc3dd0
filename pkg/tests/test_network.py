"""Network tests: forward oracle, Jacobian vs finite differences, LM behavior."""

import numpy as np
import pytest

from troughflow import network
from troughflow.errors import DomainError, TrainingError
from troughflow.network import (
    MlpRegressor,
    RangeScaler,
    correlation_coefficients,
    flatten_params,
    forward,
    init_layers,
    output_jacobian,
    unflatten_params,
)


def reference_forward(weights, biases, x):
    """Second, loop-free-of-shared-code forward pass for oracle use."""
    a = np.array(x, dtype=float)
    for layer in range(len(weights)):
        z = weights[layer] @ a + biases[layer]
        a = z if layer == len(weights) - 1 else np.tanh(z)
    return a


def finite_difference_jacobian(weights, biases, X, eps=1e-5):
    sizes = [weights[0].shape[1]] + [w.shape[0] for w in weights]
    theta = flatten_params(weights, biases)
    n_out = sizes[-1]
    jac = np.zeros((X.shape[0], n_out, theta.size))
    for p in range(theta.size):
        plus = theta.copy()
        plus[p] += eps
        minus = theta.copy()
        minus[p] -= eps
        w_p, b_p = unflatten_params(plus, sizes)
        w_m, b_m = unflatten_params(minus, sizes)
        jac[:, :, p] = (forward(w_p, b_p, X) - forward(w_m, b_m, X)) / (2 * eps)
    return jac


class TestForward:
    def test_zero_net_outputs_zero(self):
        weights = [np.zeros((4, 3)), np.zeros((2, 4))]
        biases = [np.zeros(4), np.zeros(2)]
        out = forward(weights, biases, np.ones((5, 3)))
        assert np.all(out == 0.0)

    def test_single_path_linear_regime(self):
        # one tiny weight chain: tanh(x) ~ x near zero, so the output is
        # approximately the product of the chain weights times the input
        weights = [np.zeros((2, 1)), np.zeros((1, 2))]
        biases = [np.zeros(2), np.zeros(1)]
        weights[0][0, 0] = 0.5
        weights[1][0, 0] = 0.25
        x = np.array([[1e-4]])
        out = forward(weights, biases, x)
        assert out[0, 0] == pytest.approx(0.5 * 0.25 * 1e-4, rel=1e-6)

    def test_matches_independent_evaluation(self):
        rng = np.random.default_rng(0)
        weights, biases = init_layers([6, 9, 4, 3], rng)
        X = rng.normal(size=(17, 6))
        got = forward(weights, biases, X)
        for k in range(X.shape[0]):
            assert np.allclose(
                got[k], reference_forward(weights, biases, X[k]), atol=1e-12
            )

    def test_flatten_round_trip(self):
        rng = np.random.default_rng(1)
        weights, biases = init_layers([3, 5, 2], rng)
        theta = flatten_params(weights, biases)
        w2, b2 = unflatten_params(theta, [3, 5, 2])
        for a, b in zip(weights, w2):
            assert np.array_equal(a, b)
        for a, b in zip(biases, b2):
            assert np.array_equal(a, b)


class TestJacobian:
    def test_against_central_differences(self):
        rng = np.random.default_rng(2)
        worst = 0.0
        for _ in range(20):
            sizes = [
                int(rng.integers(2, 5)),
                int(rng.integers(2, 7)),
                int(rng.integers(2, 6)),
                int(rng.integers(1, 4)),
            ]
            weights, biases = init_layers(sizes, rng)
            X = rng.normal(size=(4, sizes[0]))
            analytic = output_jacobian(weights, biases, X)
            numeric = finite_difference_jacobian(weights, biases, X)
            worst = max(worst, float(np.max(np.abs(analytic - numeric))))
        assert worst < 1e-6

    def test_no_hidden_layer_jacobian_is_design_matrix(self):
        rng = np.random.default_rng(3)
        weights, biases = init_layers([4, 1], rng)
        X = rng.normal(size=(6, 4))
        jac = output_jacobian(weights, biases, X)
        # d out / d w_j = x_j, d out / d b = 1
        assert np.allclose(jac[:, 0, :4], X, atol=1e-12)
        assert np.allclose(jac[:, 0, 4], 1.0, atol=1e-12)


class TestLmTraining:
    def test_linear_neuron_matches_least_squares(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(60, 5))
        coeffs = np.array([0.5, -1.0, 2.0, 0.1, -0.3])
        y = X @ coeffs + 0.7 + 0.01 * rng.normal(size=60)
        model = MlpRegressor(hidden_layer_sizes=(), max_epochs=200, random_state=0)
        model.fit(X, y)
        design = np.hstack([X, np.ones((60, 1))])
        closed_form, *_ = np.linalg.lstsq(design, y, rcond=None)
        fitted = np.concatenate([model.weights_[0].ravel(), model.biases_[0]])
        assert np.max(np.abs(fitted - closed_form)) < 1e-8

    def test_zero_epochs_returns_initial_net(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(10, 3))
        y = rng.normal(size=(10, 2))
        model = MlpRegressor(hidden_layer_sizes=(4,), max_epochs=0, random_state=7)
        model.fit(X, y)
        expected_w, expected_b = init_layers([3, 4, 2], np.random.default_rng(7))
        for a, b in zip(model.weights_, expected_w):
            assert np.array_equal(a, b)
        for a, b in zip(model.biases_, expected_b):
            assert np.array_equal(a, b)

    def test_quadratic_toy_converges(self):
        X = np.linspace(-1.0, 1.0, 80)[:, None]
        y = X**2
        model = MlpRegressor(hidden_layer_sizes=(10,), max_epochs=400, random_state=1)
        model.fit(X, y)
        mse = float(np.mean((model.predict(X) - y) ** 2))
        assert mse < 1e-6

    def test_sse_nonincreasing_over_accepted_steps(self):
        rng = np.random.default_rng(6)
        X = rng.uniform(-1, 1, size=(50, 2))
        y = np.tanh(X @ np.array([[1.0, -0.5], [0.3, 0.8]]))
        model = MlpRegressor(hidden_layer_sizes=(6,), max_epochs=40, random_state=2)
        model.fit(X, y)
        sse = model.history_["train_sse"]
        assert all(b <= a + 1e-12 for a, b in zip(sse, sse[1:]))

    def test_large_mu_step_follows_negative_gradient(self):
        rng = np.random.default_rng(7)
        weights, biases = init_layers([3, 5, 2], rng)
        X = rng.normal(size=(30, 3))
        y = rng.normal(size=(30, 2))
        jac = output_jacobian(weights, biases, X)
        n_params = jac.shape[-1]
        jac = jac.reshape(-1, n_params)
        err = (forward(weights, biases, X) - y).ravel()
        jtj = jac.T @ jac
        jte = jac.T @ err
        mu = 1e8
        step = np.linalg.solve(jtj + mu * np.eye(n_params), -jte)
        grad_dir = -jte
        cosine = step @ grad_dir / (
            np.linalg.norm(step) * np.linalg.norm(grad_dir)
        )
        assert cosine > 0.999

    def test_validation_early_stopping_restores_best(self):
        rng = np.random.default_rng(8)
        X = rng.uniform(-1, 1, size=(40, 3))
        y = np.sin(X.sum(axis=1))[:, None]
        x_val = rng.uniform(-1, 1, size=(15, 3))
        y_val = np.sin(x_val.sum(axis=1))[:, None] + 0.5 * rng.normal(size=(15, 1))
        model = MlpRegressor(
            hidden_layer_sizes=(12,), max_epochs=300, random_state=3, max_val_checks=6
        )
        model.fit(X, y, validation=(x_val, y_val))
        val_sse = float(np.sum((model.predict(x_val) - y_val) ** 2))
        recorded = [v for v in model.history_["val_sse"] if np.isfinite(v)]
        assert val_sse <= min(recorded) + 1e-9

    def test_empty_dataset_rejected(self):
        with pytest.raises(TrainingError):
            MlpRegressor().fit(np.empty((0, 3)), np.empty((0, 2)))

    def test_predict_validates_width(self):
        rng = np.random.default_rng(9)
        model = MlpRegressor(hidden_layer_sizes=(4,), max_epochs=2, random_state=0)
        model.fit(rng.normal(size=(10, 3)), rng.normal(size=(10, 1)))
        with pytest.raises(DomainError):
            model.predict(rng.normal(size=(5, 4)))

    def test_sklearn_params_round_trip(self):
        model = MlpRegressor(mu0=0.5, max_epochs=11)
        params = model.get_params()
        assert params["mu0"] == 0.5
        clone = MlpRegressor(**params)
        assert clone.max_epochs == 11


class TestRangeScaler:
    def test_maps_to_unit_interval(self):
        rng = np.random.default_rng(10)
        X = rng.uniform(-5, 17, size=(50, 4))
        scaler = RangeScaler().fit(X)
        scaled = scaler.transform(X)
        assert scaled.min() >= -1.0 - 1e-12
        assert scaled.max() <= 1.0 + 1e-12
        assert np.allclose(scaled.min(axis=0), -1.0)
        assert np.allclose(scaled.max(axis=0), 1.0)

    def test_round_trip_identity(self):
        rng = np.random.default_rng(11)
        X = rng.uniform(-100, 100, size=(30, 6))
        scaler = RangeScaler().fit(X)
        back = scaler.inverse_transform(scaler.transform(X))
        assert np.max(np.abs(back - X)) < 1e-12

    def test_degenerate_feature_padded(self):
        X = np.column_stack([np.full(10, 3.0), np.arange(10.0)])
        scaler = RangeScaler().fit(X)
        scaled = scaler.transform(X)
        assert np.all(np.isfinite(scaled))
        back = scaler.inverse_transform(scaled)
        assert np.max(np.abs(back - X)) < 1e-12


def test_correlation_coefficients_perfect_and_noisy():
    rng = np.random.default_rng(12)
    y = rng.normal(size=(40, 3))
    pooled, per_output = correlation_coefficients(y, y)
    assert pooled == pytest.approx(1.0)
    assert np.allclose(per_output, 1.0)
    noisy = y + 0.05 * rng.normal(size=y.shape)
    pooled, per_output = correlation_coefficients(y, noisy)
    assert 0.9 < pooled < 1.0
    assert per_output.shape == (3,)
