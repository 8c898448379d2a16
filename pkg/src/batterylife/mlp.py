"""Small fully connected regression networks trained by backpropagation.

Hidden layers use tanh, the single output unit is linear. Inputs and the
target are standardized with statistics taken from the training split;
the loss is mean squared error in standardized target space.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, InvalidConfig, IoError, NonFiniteLoss, SchemaMismatch

FORMAT = "batterylife.mlp"
VERSION = 1

ARCHITECTURES = ((3,), (5,), (5, 1), (5, 3))


@dataclass(frozen=True)
class MlpConfig:
    hidden_layers: tuple = (5,)
    input_dim: int = 5
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 256
    epochs: int = 50
    seed: int = 0
    early_stop_patience: int = 0

    def validate(self) -> "MlpConfig":
        if not self.hidden_layers or any(int(h) < 1 for h in self.hidden_layers):
            raise InvalidConfig("hidden_layers must be a non-empty list of positive sizes")
        if self.input_dim < 1:
            raise InvalidConfig("input_dim must be positive")
        if not self.learning_rate > 0:
            raise InvalidConfig("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise InvalidConfig("momentum must lie in [0, 1)")
        if self.batch_size < 1 or self.epochs < 1:
            raise InvalidConfig("batch_size and epochs must be positive")
        if self.early_stop_patience < 0:
            raise InvalidConfig("early_stop_patience must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed must be a 64-bit unsigned integer")
        return self

    @property
    def layer_sizes(self) -> tuple:
        return (int(self.input_dim),) + tuple(int(h) for h in self.hidden_layers) + (1,)


@dataclass(eq=False)
class MlpModel:
    config: MlpConfig
    weights: list
    biases: list
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float = 0.0
    y_scale: float = 1.0
    history: list = field(default_factory=list)

    def copy(self) -> "MlpModel":
        return MlpModel(
            self.config,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.x_mean.copy(),
            self.x_scale.copy(),
            self.y_mean,
            self.y_scale,
            list(self.history),
        )

    def shapes(self) -> list:
        return [(w.shape, b.shape) for w, b in zip(self.weights, self.biases)]

    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        cfg["hidden_layers"] = list(cfg["hidden_layers"])
        return {
            "format": FORMAT,
            "version": VERSION,
            "config": cfg,
            "layer_sizes": list(self.config.layer_sizes),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "x_mean": self.x_mean.tolist(),
            "x_scale": self.x_scale.tolist(),
            "y_mean": self.y_mean,
            "y_scale": self.y_scale,
            "history": list(self.history),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MlpModel":
        if doc.get("format") != FORMAT or doc.get("version") != VERSION:
            raise SchemaMismatch(f"not a {FORMAT} v{VERSION} document")
        cfg = dict(doc["config"])
        cfg["hidden_layers"] = tuple(cfg["hidden_layers"])
        return cls(
            MlpConfig(**cfg),
            [np.array(w, dtype=np.float64).reshape(o, i) for w, (i, o) in
             zip(doc["weights"], zip(doc["layer_sizes"][:-1], doc["layer_sizes"][1:]))],
            [np.array(b, dtype=np.float64) for b in doc["biases"]],
            np.array(doc["x_mean"], dtype=np.float64),
            np.array(doc["x_scale"], dtype=np.float64),
            float(doc["y_mean"]),
            float(doc["y_scale"]),
            list(doc["history"]),
        )


def _seed_stream(seed: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), purpose]))


def init_mlp(config: MlpConfig) -> MlpModel:
    """Weights ~ N(0, 1/fan_in), biases zero, identity standardization."""
    config.validate()
    rng = _seed_stream(config.seed, 0)
    sizes = config.layer_sizes
    weights = [rng.standard_normal((fan_out, fan_in)) / math.sqrt(fan_in)
               for fan_in, fan_out in zip(sizes[:-1], sizes[1:])]
    biases = [np.zeros(fan_out) for fan_out in sizes[1:]]
    return MlpModel(config, weights, biases, np.zeros(sizes[0]), np.ones(sizes[0]))


def _check_inputs(model: MlpModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.config.input_dim:
        raise DimensionMismatch(
            f"expected inputs with {model.config.input_dim} columns, got shape {X.shape}"
        )
    return X


def _forward_std(model: MlpModel, z: np.ndarray):
    """Forward pass on standardized inputs; returns output and activations."""
    acts = [z]
    a = z
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        pre = a @ w.T + b
        a = pre if i == last else np.tanh(pre)
        acts.append(a)
    return a[:, 0], acts


def predict_mlp(model: MlpModel, X) -> np.ndarray:
    """Predicted remaining time (seconds) for every row of ``X``."""
    X = _check_inputs(model, X)
    out, _ = _forward_std(model, (X - model.x_mean) / model.x_scale)
    return model.y_mean + model.y_scale * out


def forward(model: MlpModel, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("forward takes a single input vector")
    return float(predict_mlp(model, x)[0])


def loss(model: MlpModel, X, y) -> float:
    """Mean squared error in standardized target space."""
    X = _check_inputs(model, X)
    y = np.asarray(y, dtype=np.float64)
    out, _ = _forward_std(model, (X - model.x_mean) / model.x_scale)
    r = out - (y - model.y_mean) / model.y_scale
    return float(np.mean(r * r))


@dataclass
class Gradient:
    weights: list
    biases: list

    def flat(self) -> np.ndarray:
        return np.concatenate([g.ravel() for pair in zip(self.weights, self.biases) for g in pair])


def gradient(model: MlpModel, X, y) -> Gradient:
    """Exact gradient of :func:`loss` by reverse-mode accumulation."""
    X = _check_inputs(model, X)
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape != (X.shape[0],):
        raise DimensionMismatch("y length differs from batch size")
    return _gradient_std(model, (X - model.x_mean) / model.x_scale,
                         (y - model.y_mean) / model.y_scale)


def _fit_scalers(X: np.ndarray, y: np.ndarray):
    # a constant column can still show a rounding-level spread; treat as zero
    x_mean = X.mean(axis=0)
    x_scale = X.std(axis=0)
    x_scale[~(x_scale > 1e-12 * np.maximum(1.0, np.abs(x_mean)))] = 1.0
    y_mean = float(y.mean())
    y_scale = float(y.std())
    if not y_scale > 1e-12 * max(1.0, abs(y_mean)):
        y_scale = 1.0
    return x_mean, x_scale, y_mean, y_scale


def train(model: MlpModel, X, y, config: MlpConfig | None = None,
          X_val=None, y_val=None) -> MlpModel:
    """Mini-batch gradient descent with classical momentum.

    Returns a new model; ``model`` supplies the initial weights. History
    holds the training MSE in original units after every epoch. With a
    positive ``early_stop_patience`` and a validation set, training stops
    once validation MSE has not improved for that many epochs and the best
    weights are kept.
    """
    config = (config or model.config).validate()
    X = _check_inputs(model, X)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (X.shape[0],):
        raise DimensionMismatch("y length differs from row count")
    n = X.shape[0]
    batch = min(int(config.batch_size), n)

    m = model.copy()
    m.config = replace(config, input_dim=model.config.input_dim,
                       hidden_layers=model.config.hidden_layers)
    m.x_mean, m.x_scale, m.y_mean, m.y_scale = _fit_scalers(X, y)
    m.history = []
    z = (X - m.x_mean) / m.x_scale
    t = (y - m.y_mean) / m.y_scale

    rng = _seed_stream(config.seed, 1)
    vel_w = [np.zeros_like(w) for w in m.weights]
    vel_b = [np.zeros_like(b) for b in m.biases]
    lr, mu = config.learning_rate, config.momentum
    use_val = config.early_stop_patience > 0 and X_val is not None
    best_val, best_state, stale = math.inf, None, 0

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            g = _gradient_std(m, z[idx], t[idx])
            for i in range(len(m.weights)):
                vel_w[i] = mu * vel_w[i] - lr * g.weights[i]
                vel_b[i] = mu * vel_b[i] - lr * g.biases[i]
                m.weights[i] += vel_w[i]
                m.biases[i] += vel_b[i]
        out, _ = _forward_std(m, z)
        epoch_mse = float(np.mean((out - t) ** 2)) * m.y_scale ** 2
        if not math.isfinite(epoch_mse):
            raise NonFiniteLoss(epoch, epoch_mse)
        m.history.append(epoch_mse)
        if use_val:
            val = float(np.mean((predict_mlp(m, X_val) - np.asarray(y_val)) ** 2))
            if val < best_val:
                best_val, stale = val, 0
                best_state = ([w.copy() for w in m.weights], [b.copy() for b in m.biases])
            else:
                stale += 1
                if stale >= config.early_stop_patience:
                    break
    if use_val and best_state is not None:
        m.weights, m.biases = best_state
    return m


def _gradient_std(model: MlpModel, z: np.ndarray, t: np.ndarray) -> Gradient:
    b = z.shape[0]
    out, acts = _forward_std(model, z)
    delta = (2.0 / b) * (out - t)[:, None]
    gw = [None] * len(model.weights)
    gb = [None] * len(model.weights)
    for i in range(len(model.weights) - 1, -1, -1):
        gw[i] = delta.T @ acts[i]
        gb[i] = delta.sum(axis=0)
        if i > 0:
            # acts[i] = tanh(pre_i), so d tanh = 1 - acts[i]**2
            delta = (delta @ model.weights[i]) * (1.0 - acts[i] ** 2)
    return Gradient(gw, gb)


def save_model(model: MlpModel, path) -> None:
    try:
        Path(path).write_text(json.dumps(model.to_dict()))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_model(path) -> MlpModel:
    try:
        return MlpModel.from_dict(json.loads(Path(path).read_text()))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
