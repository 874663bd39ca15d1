"""Backpropagation and the three gradient-descent variants.

All three optimizers share one batch update (mean gradient, accumulated
in ascending example-index order), so minibatch(B=1) is bit-identical to
SGD and minibatch(B=n) to full GD.  Only deterministic-sigmoid models
are differentiated; stochastic-firing networks reuse weights trained in
deterministic mode.
"""

from dataclasses import dataclass, field, replace
import math

import numpy as np

from .errors import DivergenceError, DomainError, UnsupportedModeError
from .network import (DETERMINISTIC, Layer, NetworkModel, forward_trace,
                      sigmoid)
from .rngtools import derive_rng

__all__ = [
    "Example",
    "LossSpec",
    "OptimizerConfig",
    "init_model",
    "loss_value",
    "mean_loss",
    "backprop_gradient",
    "gd_step",
    "sgd_step",
    "minibatch_step",
    "train",
]

SQUARED_ERROR = "squared-error"
CROSS_ENTROPY = "binary-cross-entropy"

DIVERGENCE_GUARD = 1e6


@dataclass(frozen=True)
class Example:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))


@dataclass(frozen=True)
class LossSpec:
    kind: str = SQUARED_ERROR

    def __post_init__(self):
        if self.kind not in (SQUARED_ERROR, CROSS_ENTROPY):
            raise DomainError(f"unknown loss kind {self.kind!r}")


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str                        # "gd" | "sgd" | "minibatch"
    learning_rate: float
    epochs: int
    batch_size: int = 1              # minibatch only
    lr_decay: float = 0.0            # gamma_t = gamma0 / (1 + decay * t)
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gd", "sgd", "minibatch"):
            raise DomainError(f"unknown optimizer kind {self.kind!r}")
        if self.learning_rate <= 0:
            raise DomainError("learning_rate must be positive")
        if self.epochs < 0 or self.batch_size < 1 or self.lr_decay < 0:
            raise DomainError("invalid optimizer configuration")

    def rate_at(self, step: int) -> float:
        return self.learning_rate / (1.0 + self.lr_decay * step)


def init_model(layer_sizes, seed: int, bias_enabled: bool = True,
               output_activation: str = "sigmoid") -> NetworkModel:
    """Uniform(-r, r) weights with r = sqrt(6/(fan_in+fan_out)), zero biases."""
    rng = derive_rng(seed, "init")
    layers = []
    for n_in, n_out in zip(layer_sizes, layer_sizes[1:]):
        r = math.sqrt(6.0 / (n_in + n_out))
        layers.append(Layer(rng.uniform(-r, r, size=(n_out, n_in)),
                            np.zeros(n_out)))
    return NetworkModel(layers=layers, activation_mode=DETERMINISTIC,
                        bias_enabled=bias_enabled,
                        output_activation=output_activation)


def loss_value(model: NetworkModel, example: Example, loss: LossSpec) -> float:
    _, pres = forward_trace(model, example.x)
    y_hat = model_output(model, pres[-1])
    return _loss_from_prediction(y_hat, example.y, loss)


def model_output(model: NetworkModel, last_pre):
    if model.output_activation == "identity":
        return np.asarray(last_pre, dtype=float)
    return sigmoid(last_pre)


def _loss_from_prediction(y_hat, y, loss: LossSpec) -> float:
    y_hat = np.asarray(y_hat, dtype=float)
    y = np.asarray(y, dtype=float)
    if loss.kind == SQUARED_ERROR:
        d = y_hat - y
        return 0.5 * float(d @ d)
    eps = 1e-12
    y_hat = np.clip(y_hat, eps, 1.0 - eps)
    return -float(np.sum(y * np.log(y_hat) + (1.0 - y) * np.log(1.0 - y_hat)))


def mean_loss(model: NetworkModel, dataset, loss: LossSpec) -> float:
    if not dataset:
        raise DomainError("dataset must be non-empty")
    return sum(loss_value(model, ex, loss) for ex in dataset) / len(dataset)


def backprop_gradient(model: NetworkModel, example: Example,
                      loss: LossSpec) -> list:
    """Exact reverse-mode gradient; one (dW, db) pair per layer."""
    if model.activation_mode != DETERMINISTIC:
        raise UnsupportedModeError("stochastic firing is not differentiated")
    activations, pres = forward_trace(model, example.x)
    y_hat = activations[-1]
    y = example.y
    if y.shape != y_hat.shape:
        raise DomainError("target dimension does not match network output")
    if model.output_activation == "sigmoid":
        if loss.kind == CROSS_ENTROPY:
            delta = y_hat - y
        else:
            delta = (y_hat - y) * y_hat * (1.0 - y_hat)
    else:
        if loss.kind == CROSS_ENTROPY:
            raise DomainError("cross-entropy requires a sigmoid output")
        delta = y_hat - y
    grads = [None] * len(model.layers)
    for i in range(len(model.layers) - 1, -1, -1):
        a_prev = activations[i]
        dW = np.outer(delta, a_prev)
        db = delta.copy() if model.bias_enabled else np.zeros_like(delta)
        grads[i] = (dW, db)
        if i > 0:
            a = activations[i]
            back = model.layers[i].weights.T @ delta
            delta = back * a * (1.0 - a)
    return grads


def _apply_update(model: NetworkModel, grad_sum, count: int,
                  rate: float) -> NetworkModel:
    layers = []
    for layer, (dW, db) in zip(model.layers, grad_sum):
        layers.append(Layer(layer.weights - rate * (dW / count),
                            layer.bias - rate * (db / count)))
    return replace(model, layers=layers)


def minibatch_step(model: NetworkModel, batch, rate: float,
                   loss: LossSpec) -> NetworkModel:
    """One update with the mean gradient over the batch (ascending order)."""
    if not batch:
        raise DomainError("batch must be non-empty")
    grad_sum = None
    for example in batch:
        g = backprop_gradient(model, example, loss)
        if grad_sum is None:
            grad_sum = [(dW.copy(), db.copy()) for dW, db in g]
        else:
            for (sW, sb), (dW, db) in zip(grad_sum, g):
                sW += dW
                sb += db
    return _apply_update(model, grad_sum, len(batch), rate)


def gd_step(model: NetworkModel, dataset, rate: float,
            loss: LossSpec) -> NetworkModel:
    """Full-batch update over the whole dataset."""
    if not dataset:
        raise DomainError("dataset must be non-empty")
    return minibatch_step(model, dataset, rate, loss)


def sgd_step(model: NetworkModel, example: Example, rate: float,
             loss: LossSpec) -> NetworkModel:
    """Single-example update."""
    return minibatch_step(model, [example], rate, loss)


def train(model: NetworkModel, dataset, config: OptimizerConfig,
          loss: LossSpec):
    """Run the configured optimizer; returns (model, per-epoch mean loss).

    SGD and minibatch reshuffle the example order every epoch from the
    dedicated shuffle seed (Fisher-Yates); full GD never shuffles.
    """
    if not dataset:
        raise DomainError("dataset must be non-empty")
    n = len(dataset)
    if config.kind == "minibatch" and config.batch_size > n:
        raise DomainError("batch_size exceeds dataset size")
    shuffle_rng = derive_rng(config.shuffle_seed, "shuffle")
    history = []
    step = 0
    for _ in range(config.epochs):
        if config.kind == "gd":
            model = gd_step(model, dataset, config.rate_at(step), loss)
            step += 1
        else:
            order = shuffle_rng.permutation(n)
            batch_size = 1 if config.kind == "sgd" else config.batch_size
            for start in range(0, n, batch_size):
                batch = [dataset[i] for i in order[start:start + batch_size]]
                model = minibatch_step(model, batch, config.rate_at(step), loss)
                step += 1
        epoch_loss = mean_loss(model, dataset, loss)
        history.append(epoch_loss)
        if not math.isfinite(epoch_loss) or epoch_loss > DIVERGENCE_GUARD:
            raise DivergenceError(
                f"mean loss {epoch_loss} exceeded the divergence guard")
    return model, history


def finite_difference_gradient(model: NetworkModel, example: Example,
                               loss: LossSpec, h: float = 1e-5) -> list:
    """Central-difference gradient, independent of backprop; for checking."""
    grads = []
    for li, layer in enumerate(model.layers):
        dW = np.zeros_like(layer.weights)
        db = np.zeros_like(layer.bias)
        for idx in np.ndindex(layer.weights.shape):
            base = layer.weights[idx]
            layer.weights[idx] = base + h
            up = loss_value(model, example, loss)
            layer.weights[idx] = base - h
            down = loss_value(model, example, loss)
            layer.weights[idx] = base
            dW[idx] = (up - down) / (2.0 * h)
        if model.bias_enabled:
            for j in range(layer.bias.size):
                base = layer.bias[j]
                layer.bias[j] = base + h
                up = loss_value(model, example, loss)
                layer.bias[j] = base - h
                down = loss_value(model, example, loss)
                layer.bias[j] = base
                db[j] = (up - down) / (2.0 * h)
        grads.append((dW, db))
    return grads


def write_history_csv(history, path):
    with open(path, "w", newline="\n") as fh:
        fh.write("epoch,mean_loss\n")
        for i, v in enumerate(history):
            fh.write(f"{i},{float(v)!r}\n")
