"""Multilayer perceptron with Levenberg-Marquardt least-squares training.

The regressor follows the scikit-learn estimator API (fit/predict,
get_params) so it composes with pipelines and model selection; the trainer
itself is implemented here rather than delegated, because the damped
Gauss-Newton loop with validation-based early stopping is the part under
test. Hidden layers use tanh, the output layer is linear, and training
minimizes the sum of squared errors over the full batch with a chunked
accumulation of the normal equations.
"""

import time

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import DomainError, TrainingError


class RangeScaler(BaseEstimator, TransformerMixin):
    """Per-feature affine map onto [-1, 1] with an exact inverse.

    Features that are constant on the fit data get a unit-width padded range
    so the transform stays invertible.
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        self.data_min_ = X.min(axis=0)
        self.data_max_ = X.max(axis=0)
        degenerate = self.data_max_ <= self.data_min_
        self.data_max_ = np.where(degenerate, self.data_min_ + 1.0, self.data_max_)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "data_min_")
        X = check_array(X, dtype=float)
        span = self.data_max_ - self.data_min_
        return 2.0 * (X - self.data_min_) / span - 1.0

    def inverse_transform(self, X):
        check_is_fitted(self, "data_min_")
        X = check_array(X, dtype=float)
        span = self.data_max_ - self.data_min_
        return (X + 1.0) * span / 2.0 + self.data_min_


def init_layers(layer_sizes, rng):
    """Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer."""
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-limit, limit, size=fan_out))
    return weights, biases


def forward(weights, biases, X, keep_activations=False):
    """Layered affine-then-tanh evaluation; the last layer stays linear."""
    a = np.asarray(X, dtype=float)
    activations = [a]
    pre_activations = []
    last = len(weights) - 1
    for layer, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w.T + b
        a = z if layer == last else np.tanh(z)
        pre_activations.append(z)
        activations.append(a)
    if keep_activations:
        return a, activations, pre_activations
    return a


def flatten_params(weights, biases):
    return np.concatenate(
        [np.concatenate([w.ravel(), b]) for w, b in zip(weights, biases)]
    )


def unflatten_params(theta, layer_sizes):
    weights, biases = [], []
    k = 0
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        weights.append(theta[k : k + fan_out * fan_in].reshape(fan_out, fan_in))
        k += fan_out * fan_in
        biases.append(theta[k : k + fan_out])
        k += fan_out
    return weights, biases


def output_jacobian(weights, biases, X):
    """Per-sample Jacobian of network outputs w.r.t. all parameters.

    Returns an array shaped (n_samples, n_outputs, n_params) with parameter
    columns ordered layer by layer, weights (row-major) before biases —
    matching flatten_params.
    """
    X = np.asarray(X, dtype=float)
    n_layers = len(weights)
    n_out = weights[-1].shape[0]
    batch = X.shape[0]
    _, activations, pre_activations = forward(weights, biases, X, keep_activations=True)
    # delta: d(output_o)/d(z_layer), shape (batch, n_out, layer_width)
    delta = np.broadcast_to(np.eye(n_out), (batch, n_out, n_out)).copy()
    per_layer = [None] * n_layers
    for layer in range(n_layers - 1, -1, -1):
        a_prev = activations[layer]
        jac_w = np.einsum("boj,bk->bojk", delta, a_prev)
        per_layer[layer] = (jac_w, delta)
        if layer > 0:
            back = delta @ weights[layer]
            delta = back * (1.0 - np.tanh(pre_activations[layer - 1]) ** 2)[:, None, :]
    columns = []
    for jac_w, jac_b in per_layer:
        columns.append(jac_w.reshape(batch, n_out, -1))
        columns.append(jac_b)
    return np.concatenate(columns, axis=2)


class MlpRegressor(BaseEstimator, RegressorMixin):
    """Tanh MLP trained by Levenberg-Marquardt backpropagation.

    Parameters mirror the usual damped Gauss-Newton schedule: the damping
    factor mu starts at mu0, shrinks by mu_decrease on accepted steps and
    grows by mu_increase on rejected ones; training stops on max_epochs, on
    the gradient infinity-norm dropping below min_gradient, on mu exceeding
    mu_max, or on max_val_checks consecutive validation-SSE increases (in
    which case the best-validation weights are restored).

    Inputs and targets are expected pre-scaled (see RangeScaler); the
    estimator does not rescale.
    """

    def __init__(
        self,
        hidden_layer_sizes=(50, 25, 10),
        mu0=1e-3,
        mu_increase=10.0,
        mu_decrease=0.1,
        mu_max=1e10,
        max_epochs=4000,
        min_gradient=1e-7,
        max_val_checks=6,
        random_state=None,
        chunk_size=512,
    ):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.mu0 = mu0
        self.mu_increase = mu_increase
        self.mu_decrease = mu_decrease
        self.mu_max = mu_max
        self.max_epochs = max_epochs
        self.min_gradient = min_gradient
        self.max_val_checks = max_val_checks
        self.random_state = random_state
        self.chunk_size = chunk_size

    def _normal_equations(self, X, Y):
        """Accumulate JᵀJ, Jᵀe and the SSE chunk by chunk (memory O(chunk))."""
        n_params = self.n_params_
        jtj = np.zeros((n_params, n_params))
        jte = np.zeros(n_params)
        sse = 0.0
        for start in range(0, X.shape[0], self.chunk_size):
            xb = X[start : start + self.chunk_size]
            yb = Y[start : start + self.chunk_size]
            jac = output_jacobian(self.weights_, self.biases_, xb)
            jac = jac.reshape(-1, n_params)
            err = (forward(self.weights_, self.biases_, xb) - yb).ravel()
            jtj += jac.T @ jac
            jte += jac.T @ err
            sse += float(err @ err)
        return jtj, jte, sse

    def _sse(self, X, Y):
        err = forward(self.weights_, self.biases_, X) - Y
        return float(np.sum(err * err))

    def fit(self, X, y, validation=None):
        """Train on (X, y); optional validation=(X_val, y_val) enables the
        early-stopping check and best-weights restore."""
        if len(X) == 0:
            raise TrainingError("empty training set")
        X = check_array(X, dtype=float)
        y = check_array(y, dtype=float, ensure_2d=False)
        if y.ndim == 1:
            y = y[:, None]
        if X.shape[0] != y.shape[0]:
            raise DomainError("X and y must have the same number of samples")
        layer_sizes = [X.shape[1], *self.hidden_layer_sizes, y.shape[1]]
        rng = np.random.default_rng(self.random_state)
        self.weights_, self.biases_ = init_layers(layer_sizes, rng)
        self.layer_sizes_ = layer_sizes
        self.n_features_in_ = X.shape[1]
        self.n_outputs_ = y.shape[1]
        self.n_params_ = sum(w.size + b.size for w, b in zip(self.weights_, self.biases_))

        if validation is not None:
            x_val = check_array(validation[0], dtype=float)
            y_val = check_array(validation[1], dtype=float, ensure_2d=False)
            if y_val.ndim == 1:
                y_val = y_val[:, None]
        mu = self.mu0
        best_val = np.inf
        best_theta = flatten_params(self.weights_, self.biases_)
        val_checks = 0
        history = {"epoch": [], "train_sse": [], "val_sse": [], "mu": []}
        self.stop_reason_ = "max_epochs"
        started = time.perf_counter()

        epoch = 0
        while epoch < self.max_epochs:
            jtj, jte, sse = self._normal_equations(X, y)
            gradient_norm = float(np.max(np.abs(jte))) if jte.size else 0.0
            if gradient_norm < self.min_gradient:
                self.stop_reason_ = "min_gradient"
                break
            theta = flatten_params(self.weights_, self.biases_)
            accepted = False
            while True:
                damped = jtj + mu * np.eye(self.n_params_)
                try:
                    step = np.linalg.solve(damped, -jte)
                except np.linalg.LinAlgError as exc:
                    raise TrainingError(
                        f"normal equations singular at mu={mu:g} "
                        f"(epoch {epoch}, sse {sse:g})"
                    ) from exc
                self.weights_, self.biases_ = unflatten_params(
                    theta + step, layer_sizes
                )
                new_sse = self._sse(X, y)
                if new_sse < sse:
                    mu = max(mu * self.mu_decrease, np.finfo(float).tiny)
                    accepted = True
                    break
                mu *= self.mu_increase
                self.weights_, self.biases_ = unflatten_params(theta, layer_sizes)
                if mu > self.mu_max:
                    break
            if not accepted:
                self.stop_reason_ = "mu_max"
                break

            val_sse = np.nan
            if validation is not None:
                val_sse = self._sse(x_val, y_val)
                if val_sse < best_val:
                    best_val = val_sse
                    best_theta = flatten_params(self.weights_, self.biases_)
                    val_checks = 0
                else:
                    val_checks += 1
            history["epoch"].append(epoch)
            history["train_sse"].append(new_sse)
            history["val_sse"].append(val_sse)
            history["mu"].append(mu)
            epoch += 1
            if validation is not None and val_checks >= self.max_val_checks:
                self.stop_reason_ = "val_checks"
                break

        # with a validation set, always return the best-validation weights
        if validation is not None and best_val < self._sse(x_val, y_val):
            self.weights_, self.biases_ = unflatten_params(best_theta, layer_sizes)
        self.history_ = history
        self.n_epochs_ = epoch
        self.fit_seconds_ = time.perf_counter() - started
        return self

    def predict(self, X):
        check_is_fitted(self, "weights_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise DomainError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        return forward(self.weights_, self.biases_, X)


def correlation_coefficients(y_true, y_pred):
    """Pearson correlation of predictions vs targets.

    Returns (pooled, per_output): pooled flattens everything before
    correlating; per_output is one coefficient per target column.
    """
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.ndim == 1:
        y_true = y_true[:, None]
        y_pred = y_pred[:, None]

    def corr(a, b):
        a = a - a.mean()
        b = b - b.mean()
        denom = np.sqrt(np.sum(a * a) * np.sum(b * b))
        return float(np.sum(a * b) / denom) if denom > 0 else np.nan

    pooled = corr(y_true.ravel(), y_pred.ravel())
    per_output = np.array(
        [corr(y_true[:, j], y_pred[:, j]) for j in range(y_true.shape[1])]
    )
    return pooled, per_output
