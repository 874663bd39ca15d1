"""Layered crossbar network with sigmoid or stochastic-firing neurons.

Each layer is a weight matrix (rows = outputs) plus a bias vector; the
weighted sum accumulates columns in ascending input index so repeated
runs are bit-identical.  Deterministic mode applies the mathematical
sigmoid; stochastic mode emits a 0/1 spike per neuron with the sigmoid
as its firing probability (optionally routed through a fitted device
curve via a current scale).
"""

from dataclasses import dataclass, field
import json

import numpy as np

from .errors import DomainError, ShapeError
from .mtj import SigmoidFit
from .rngtools import derive_rng

__all__ = [
    "DETERMINISTIC",
    "STOCHASTIC",
    "Layer",
    "NetworkModel",
    "sigmoid",
    "weighted_sum",
    "fire",
    "forward",
    "forward_trace",
    "forward_rate",
    "save_model",
    "load_model",
]

DETERMINISTIC = "deterministic-sigmoid"
STOCHASTIC = "stochastic-firing"

MODEL_FORMAT_VERSION = 1


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


@dataclass
class Layer:
    weights: np.ndarray         # (n_out, n_in)
    bias: np.ndarray            # (n_out,)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ShapeError("layer weights must be (n_out, n_in) with matching bias")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise DomainError("layer parameters must be finite")


@dataclass
class NetworkModel:
    layers: list
    activation_mode: str = DETERMINISTIC
    neuron_fit: SigmoidFit | None = None   # device curve for stochastic firing
    unit_current: float = 0.0              # A per unit pre-activation (device mode)
    output_activation: str = "sigmoid"     # "sigmoid" | "identity"
    bias_enabled: bool = True

    def __post_init__(self):
        if self.activation_mode not in (DETERMINISTIC, STOCHASTIC):
            raise DomainError(f"unknown activation mode {self.activation_mode!r}")
        if self.output_activation not in ("sigmoid", "identity"):
            raise DomainError(f"unknown output activation {self.output_activation!r}")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.weights.shape[1] != prev.weights.shape[0]:
                raise ShapeError("adjacent layer dimensions are incompatible")

    @property
    def input_dim(self) -> int:
        return self.layers[0].weights.shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weights.shape[0]


def weighted_sum(x, weights, bias) -> np.ndarray:
    """Matrix-vector product plus bias, accumulated in ascending input index."""
    x = np.asarray(x, dtype=float)
    weights = np.asarray(weights, dtype=float)
    bias = np.asarray(bias, dtype=float)
    if x.shape != (weights.shape[1],) or bias.shape != (weights.shape[0],):
        raise ShapeError(
            f"weighted_sum shapes: x{x.shape}, W{weights.shape}, b{bias.shape}")
    out = bias.copy()
    for j in range(weights.shape[1]):
        out += weights[:, j] * x[j]
    return out


def _firing_probability(pre, model: NetworkModel):
    if model.neuron_fit is not None and model.unit_current > 0.0:
        return model.neuron_fit.predict(np.asarray(pre) * model.unit_current)
    return sigmoid(pre)


def fire(pre_activation, mode: str, neuron_fit: SigmoidFit | None = None,
         rng: np.random.Generator | None = None):
    """Activation of one neuron: sigmoid value, or a sampled 0/1 spike."""
    x = float(pre_activation)
    p = float(sigmoid(x)) if neuron_fit is None else float(neuron_fit.predict(x))
    if mode == DETERMINISTIC:
        return p
    if mode == STOCHASTIC:
        if rng is None:
            raise DomainError("stochastic firing requires an RNG stream")
        return int(rng.random() < p)
    raise DomainError(f"unknown activation mode {mode!r}")


def _output(pre, model: NetworkModel):
    if model.output_activation == "identity":
        return np.asarray(pre, dtype=float)
    return sigmoid(pre)


def forward(model: NetworkModel, x, seed: int | None = None,
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Forward pass; stochastic mode samples one spike per hidden neuron and
    per output (outputs are spikes too in stochastic mode)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.input_dim,):
        raise ShapeError(f"input shape {x.shape} != ({model.input_dim},)")
    if model.activation_mode == DETERMINISTIC:
        a = x
        for layer in model.layers[:-1]:
            a = sigmoid(weighted_sum(a, layer.weights, layer.bias))
        last = model.layers[-1]
        return _output(weighted_sum(a, last.weights, last.bias), model)
    if rng is None:
        if seed is None:
            raise DomainError("stochastic forward requires a seed or RNG")
        rng = derive_rng(seed, "forward")
    a = x
    for layer in model.layers:
        pre = weighted_sum(a, layer.weights, layer.bias)
        p = _firing_probability(pre, model)
        a = (rng.random(p.shape) < p).astype(float)
    return a


def forward_trace(model: NetworkModel, x):
    """Deterministic forward returning (activations, pre-activations) per
    layer for backpropagation; activations[0] is the input."""
    if model.activation_mode != DETERMINISTIC:
        raise DomainError("forward_trace supports deterministic mode only")
    x = np.asarray(x, dtype=float)
    if x.shape != (model.input_dim,):
        raise ShapeError(f"input shape {x.shape} != ({model.input_dim},)")
    activations = [x]
    pres = []
    a = x
    for i, layer in enumerate(model.layers):
        pre = weighted_sum(a, layer.weights, layer.bias)
        pres.append(pre)
        if i == len(model.layers) - 1:
            a = _output(pre, model)
        else:
            a = sigmoid(pre)
        activations.append(a)
    return activations, pres


def forward_rate(model: NetworkModel, x, window: int, seed: int) -> np.ndarray:
    """Rate-coded stochastic inference: mean spike output over `window`
    independent forward passes."""
    if window < 1:
        raise DomainError("window must be >= 1")
    rng = derive_rng(seed, "rate-window")
    acc = np.zeros(model.output_dim)
    for _ in range(window):
        acc += forward(model, x, rng=rng)
    return acc / window


def save_model(model: NetworkModel, path):
    doc = {
        "version": MODEL_FORMAT_VERSION,
        "activation_mode": model.activation_mode,
        "output_activation": model.output_activation,
        "bias_enabled": model.bias_enabled,
        "unit_current": model.unit_current,
        "neuron_fit": None if model.neuron_fit is None else {
            "a": model.neuron_fit.a, "b": model.neuron_fit.b,
            "r_squared": model.neuron_fit.r_squared},
        "layers": [
            {"n_out": int(l.weights.shape[0]), "n_in": int(l.weights.shape[1]),
             "weights": l.weights.ravel().tolist(),   # row-major
             "bias": l.bias.tolist()}
            for l in model.layers
        ],
    }
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_model(path) -> NetworkModel:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise DomainError(f"unsupported model format version {doc.get('version')}")
    layers = [
        Layer(np.asarray(l["weights"], dtype=float).reshape(l["n_out"], l["n_in"]),
              np.asarray(l["bias"], dtype=float))
        for l in doc["layers"]
    ]
    fit = doc.get("neuron_fit")
    return NetworkModel(
        layers=layers,
        activation_mode=doc["activation_mode"],
        neuron_fit=None if fit is None else SigmoidFit(**fit),
        unit_current=doc.get("unit_current", 0.0),
        output_activation=doc.get("output_activation", "sigmoid"),
        bias_enabled=doc.get("bias_enabled", True),
    )
