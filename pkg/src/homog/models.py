"""Small from-scratch classifiers whose mistakes feed the outcome matrices.

Both families standardize features at fit time (z-scores, zero-variance
columns get scale 1) and carry that transform for prediction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit as _sigmoid


class DegenerateTrainingSetError(ValueError):
    """Training labels contain a single class."""


@dataclass(frozen=True)
class TrainConfig:
    l2_strength: float = 1.0
    max_iterations: int = 1000
    tolerance: float = 1e-6
    learning_rate: float = 1.0
    seed: int = 0
    hidden_width: int = 32
    epochs: int = 200
    batch_size: int = 32
    momentum: float = 0.9

    def __post_init__(self):
        if self.learning_rate <= 0 or self.tolerance <= 0:
            raise ValueError("learning_rate and tolerance must be positive")
        if self.l2_strength < 0:
            raise ValueError("l2_strength must be non-negative")
        if self.hidden_width < 1 or self.batch_size < 1:
            raise ValueError("hidden_width and batch_size must be at least 1")


LOGREG_DEFAULTS = TrainConfig()
MLP_DEFAULTS = TrainConfig(l2_strength=1e-4, learning_rate=1e-2)


def default_config(family: str, **overrides) -> TrainConfig:
    base = {"logreg": LOGREG_DEFAULTS, "mlp": MLP_DEFAULTS}.get(family)
    if base is None:
        raise ValueError(f"unknown model family {family!r}")
    return replace(base, **overrides)


def _log_loss(z, y):
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def _standardizer(X):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return mean, scale


def _check_training(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 training rows")
    if not np.isfinite(X).all():
        raise ValueError("features must be finite")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be 0/1")
    if y.min() == y.max():
        raise DegenerateTrainingSetError(f"degenerate training set: every label is {int(y[0])}")
    return X, y


@dataclass(frozen=True, eq=False)
class LinearModel:
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    scale: np.ndarray

    def decision_function(self, X) -> np.ndarray:
        Z = (np.asarray(X, dtype=np.float64) - self.mean) / self.scale
        return Z @ self.weights + self.bias


@dataclass(frozen=True, eq=False)
class MlpModel:
    hidden_weights: np.ndarray   # (d, h)
    hidden_bias: np.ndarray      # (h,)
    output_weights: np.ndarray   # (h,)
    output_bias: float
    mean: np.ndarray
    scale: np.ndarray

    @property
    def hidden_width(self) -> int:
        return self.hidden_bias.shape[0]

    def decision_function(self, X) -> np.ndarray:
        Z = (np.asarray(X, dtype=np.float64) - self.mean) / self.scale
        a = np.maximum(Z @ self.hidden_weights + self.hidden_bias, 0.0)
        return a @ self.output_weights + self.output_bias


@dataclass(frozen=True)
class ConstantModel:
    """Predicts one label everywhere; stands in when training data is single-class."""

    label: int
    n_features: int

    def decision_function(self, X) -> np.ndarray:
        n = np.asarray(X).shape[0]
        return np.full(n, np.inf if self.label else -np.inf)


def predict_proba(model, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    d = model.n_features if isinstance(model, ConstantModel) else model.mean.shape[0]
    if X.shape[1] != d:
        raise ValueError(f"model expects {d} features, got {X.shape[1]}")
    return _sigmoid(model.decision_function(X))


def predict(model, X, threshold: float = 0.5) -> np.ndarray:
    return (predict_proba(model, X) >= threshold).astype(np.int64)


# ----------------------------------------------------------------------------
# logistic regression


def _logreg_objective(Z, y, w, b, l2):
    z = Z @ w + b
    loss = _log_loss(z, y) + 0.5 * l2 * float(w @ w)
    r = (_sigmoid(z) - y) / y.shape[0]
    return loss, Z.T @ r + l2 * w, float(r.sum())


def train_logreg(features, labels, config: TrainConfig = LOGREG_DEFAULTS) -> LinearModel:
    """L2-regularized logistic regression by full-batch gradient descent.

    Minimizes mean log loss + ``l2_strength * |w|^2 / 2`` (bias unpenalized)
    on standardized features. The step is ``learning_rate`` capped at
    ``1 / L`` for the objective's gradient Lipschitz bound ``L``.
    """
    X, y = _check_training(features, labels)
    mean, scale = _standardizer(X)
    Z = (X - mean) / scale
    n, d = Z.shape
    aug = np.hstack([Z, np.ones((n, 1))])
    lipschitz = 0.25 * np.linalg.norm(aug, 2) ** 2 / n + config.l2_strength
    step = min(config.learning_rate, 1.0 / lipschitz)

    w = np.zeros(d)
    b = 0.0
    for _ in range(config.max_iterations):
        _, gw, gb = _logreg_objective(Z, y, w, b, config.l2_strength)
        if math.sqrt(float(gw @ gw) + gb * gb) < config.tolerance:
            break
        w = w - step * gw
        b = b - step * gb
    return LinearModel(w, float(b), mean, scale)


# ----------------------------------------------------------------------------
# one-hidden-layer network


def _mlp_init(d, h, rng):
    lim1 = math.sqrt(6.0 / (d + h))
    lim2 = math.sqrt(6.0 / (h + 1))
    return [rng.uniform(-lim1, lim1, size=(d, h)), np.zeros(h),
            rng.uniform(-lim2, lim2, size=h), np.zeros(())]


def _mlp_objective(Z, y, params, l2):
    W1, b1, w2, b2 = params
    z1 = Z @ W1 + b1
    a = np.maximum(z1, 0.0)
    o = a @ w2 + b2
    loss = _log_loss(o, y) + 0.5 * l2 * (float(np.sum(W1 * W1)) + float(w2 @ w2))
    d_o = (_sigmoid(o) - y) / y.shape[0]
    g_w2 = a.T @ d_o + l2 * w2
    g_b2 = np.asarray(d_o.sum())
    d_z1 = np.outer(d_o, w2) * (z1 > 0)
    g_W1 = Z.T @ d_z1 + l2 * W1
    g_b1 = d_z1.sum(axis=0)
    return loss, [g_W1, g_b1, g_w2, g_b2]


def train_mlp(features, labels, config: TrainConfig = MLP_DEFAULTS) -> MlpModel:
    """Rectifier network with one hidden layer, trained by momentum SGD.

    Weights start Glorot-uniform from ``config.seed``; the same seed also
    drives the per-epoch shuffles, so a given config is bit-reproducible.
    """
    X, y = _check_training(features, labels)
    mean, scale = _standardizer(X)
    Z = (X - mean) / scale
    n, d = Z.shape
    rng = np.random.default_rng(config.seed)
    params = _mlp_init(d, config.hidden_width, rng)
    velocity = [np.zeros_like(p) for p in params]
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            _, grads = _mlp_objective(Z[idx], y[idx], params, config.l2_strength)
            for p, v, g in zip(params, velocity, grads):
                v *= config.momentum
                v -= config.learning_rate * g
                p += v
    W1, b1, w2, b2 = params
    return MlpModel(W1, b1, w2, float(b2), mean, scale)


def fit_model(family: str, features, labels, config: TrainConfig | None = None):
    """Train one model; single-class data yields a :class:`ConstantModel`.

    Returns ``(model, fell_back)``.
    """
    if config is None:
        config = default_config(family)
    trainer = {"logreg": train_logreg, "mlp": train_mlp}.get(family)
    if trainer is None:
        raise ValueError(f"unknown model family {family!r}")
    try:
        return trainer(features, labels, config), False
    except DegenerateTrainingSetError:
        X = np.asarray(features)
        d = 1 if X.ndim == 1 else X.shape[1]
        return ConstantModel(int(np.asarray(labels).ravel()[0]), d), True


# ----------------------------------------------------------------------------


def _flatten(parts):
    return np.concatenate([np.ravel(p) for p in parts])


def gradient_check(model_kind: str, features, labels, epsilon: float = 1e-5,
                   seed: int = 0, l2_strength: float = 0.1) -> float:
    """Worst relative gap between analytic and central-difference gradients.

    Parameters are drawn at random from ``seed``. Each coordinate's error is
    ``|analytic - numeric| / max(|analytic| + |numeric|, 1e-8)``.
    """
    if not (isinstance(epsilon, (int, float)) and math.isfinite(epsilon) and epsilon > 0):
        raise ValueError(f"invalid epsilon: {epsilon!r}")
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64).ravel()
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] > 32 or X.shape[1] > 8:
        raise ValueError("gradient_check is meant for small instances (N <= 32, d <= 8)")
    mean, scale = _standardizer(X)
    Z = (X - mean) / scale
    rng = np.random.default_rng(seed)
    d = Z.shape[1]

    if model_kind == "logreg":
        shapes = [(d,), ()]
        theta = rng.normal(size=d + 1)

        def objective(flat):
            loss, gw, gb = _logreg_objective(Z, y, flat[:d], flat[d], l2_strength)
            return loss, np.append(gw, gb)
    elif model_kind == "mlp":
        h = 5
        init = _mlp_init(d, h, rng)
        init[1] = rng.normal(scale=0.5, size=h)
        init[3] = np.asarray(rng.normal())
        shapes = [p.shape for p in init]
        theta = _flatten(init)

        def objective(flat):
            parts, at = [], 0
            for s in shapes:
                size = int(np.prod(s))
                parts.append(flat[at:at + size].reshape(s))
                at += size
            loss, grads = _mlp_objective(Z, y, parts, l2_strength)
            return loss, _flatten(grads)
    else:
        raise ValueError(f"unknown model kind {model_kind!r}")

    _, analytic = objective(theta)
    worst = 0.0
    for t in range(theta.size):
        bump = np.zeros_like(theta)
        bump[t] = epsilon
        numeric = (objective(theta + bump)[0] - objective(theta - bump)[0]) / (2 * epsilon)
        err = abs(analytic[t] - numeric) / max(abs(analytic[t]) + abs(numeric), 1e-8)
        worst = max(worst, err)
    return worst
