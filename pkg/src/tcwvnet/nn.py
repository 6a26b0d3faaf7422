"""Dense feed-forward regression network with hand-written backpropagation.

Weights of a layer are stored as ``[output_dim, input_dim]`` so that a
layer computes ``v = W @ y_prev + b`` followed by its activation.  The
per-sample functions (:func:`forward`, :func:`backward`,
:func:`accumulate_batch_gradients`) follow the layer-wise delta recursion
literally; :func:`forward_batch` and :func:`batch_gradients` are the
vectorised equivalents used by the training loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import InsufficientDataError, ShapeError

ACTIVATIONS = ("relu", "linear")


@dataclass(frozen=True)
class LayerSpec:
    input_dim: int
    output_dim: int
    activation: str = "relu"

    def __post_init__(self):
        if int(self.input_dim) < 1 or int(self.output_dim) < 1:
            raise ShapeError(f"layer dimensions must be >= 1, got {self.input_dim}->{self.output_dim}")
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"unknown activation {self.activation!r}")


def default_architecture(n_inputs: int = 9, hidden: Sequence[int] = (64, 32),
                         output_relu: bool = False) -> list[LayerSpec]:
    """The 9 -> 64 -> 32 -> 1 stack, ReLU hidden layers, linear output by default."""
    dims = [n_inputs, *hidden, 1]
    specs = [LayerSpec(dims[k], dims[k + 1], "relu") for k in range(len(dims) - 2)]
    specs.append(LayerSpec(dims[-2], 1, "relu" if output_relu else "linear"))
    return specs


def check_chain(specs: Sequence[LayerSpec]) -> None:
    if not specs:
        raise ShapeError("network needs at least one layer")
    for k in range(len(specs) - 1):
        if specs[k].output_dim != specs[k + 1].input_dim:
            raise ShapeError(
                f"layer {k} output_dim {specs[k].output_dim} != layer {k + 1} input_dim {specs[k + 1].input_dim}"
            )


@dataclass
class Layer:
    weights: np.ndarray
    biases: np.ndarray
    spec: LayerSpec

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.shape != (self.spec.output_dim, self.spec.input_dim):
            raise ShapeError(f"weights shape {self.weights.shape} does not match {self.spec}")
        if self.biases.shape != (self.spec.output_dim,):
            raise ShapeError(f"biases shape {self.biases.shape} does not match {self.spec}")


@dataclass
class MlpParams:
    layers: list[Layer]

    def __post_init__(self):
        check_chain([layer.spec for layer in self.layers])

    @classmethod
    def initialize(cls, specs: Sequence[LayerSpec], seed: int) -> "MlpParams":
        """He-uniform weights, zero biases, drawn from a PCG64 generator."""
        check_chain(specs)
        rng = np.random.default_rng(seed)
        layers = []
        for spec in specs:
            limit = np.sqrt(6.0 / spec.input_dim)
            w = rng.uniform(-limit, limit, size=(spec.output_dim, spec.input_dim))
            layers.append(Layer(w, np.zeros(spec.output_dim), spec))
        return cls(layers)

    @classmethod
    def zeros(cls, specs: Sequence[LayerSpec]) -> "MlpParams":
        check_chain(specs)
        return cls([Layer(np.zeros((s.output_dim, s.input_dim)), np.zeros(s.output_dim), s) for s in specs])

    @property
    def specs(self) -> list[LayerSpec]:
        return [layer.spec for layer in self.layers]

    @property
    def input_dim(self) -> int:
        return self.layers[0].spec.input_dim

    def copy(self) -> "MlpParams":
        return MlpParams([Layer(l.weights.copy(), l.biases.copy(), l.spec) for l in self.layers])

    def arrays(self) -> Iterator[np.ndarray]:
        for layer in self.layers:
            yield layer.weights
            yield layer.biases

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


@dataclass
class ForwardTrace:
    input: np.ndarray
    pre_activations: list[np.ndarray] = field(default_factory=list)
    activations: list[np.ndarray] = field(default_factory=list)


@dataclass
class GradientSet:
    weight_grads: list[np.ndarray]
    bias_grads: list[np.ndarray]

    @classmethod
    def zeros_like(cls, params: MlpParams) -> "GradientSet":
        return cls([np.zeros_like(l.weights) for l in params.layers],
                   [np.zeros_like(l.biases) for l in params.layers])

    def arrays(self) -> Iterator[np.ndarray]:
        for gw, gb in zip(self.weight_grads, self.bias_grads):
            yield gw
            yield gb

    def check_matches(self, params: MlpParams) -> None:
        if len(self.weight_grads) != len(params.layers) or len(self.bias_grads) != len(params.layers):
            raise ShapeError("gradient set has a different number of layers than the parameters")
        for k, layer in enumerate(params.layers):
            if self.weight_grads[k].shape != layer.weights.shape or self.bias_grads[k].shape != layer.biases.shape:
                raise ShapeError(f"gradient shapes of layer {k} do not match parameters")


def relu(x):
    out = np.maximum(x, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def relu_derivative(x):
    # subgradient at exactly 0 is 0
    out = np.where(np.asarray(x) > 0.0, 1.0, 0.0)
    return float(out) if out.ndim == 0 else out


def _activate(activation: str, v):
    return relu(v) if activation == "relu" else v


def _activation_derivative(activation: str, v):
    return relu_derivative(v) if activation == "relu" else np.ones_like(v)


def forward(params: MlpParams, x) -> tuple[float, ForwardTrace]:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.input_dim,):
        raise ShapeError(f"input has shape {x.shape}, network expects ({params.input_dim},)")
    trace = ForwardTrace(input=x)
    y = x
    for layer in params.layers:
        v = layer.weights @ y + layer.biases
        y = _activate(layer.spec.activation, v)
        trace.pre_activations.append(v)
        trace.activations.append(y)
    if y.shape != (1,):
        raise ShapeError(f"final layer must have one output, got {y.shape[0]}")
    return float(y[0]), trace


def forward_batch(params: MlpParams, X) -> tuple[np.ndarray, ForwardTrace]:
    """Row-wise forward pass over ``X`` of shape ``[B, input_dim]``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.input_dim:
        raise ShapeError(f"input has shape {X.shape}, network expects (B, {params.input_dim})")
    trace = ForwardTrace(input=X)
    y = X
    for layer in params.layers:
        v = y @ layer.weights.T + layer.biases
        y = _activate(layer.spec.activation, v)
        trace.pre_activations.append(v)
        trace.activations.append(y)
    return y[:, 0], trace


def predict(params: MlpParams, X) -> np.ndarray:
    return forward_batch(params, X)[0]


def batch_loss(predictions, targets) -> float:
    """Mean squared error over the batch."""
    p = np.asarray(predictions, dtype=np.float64).ravel()
    t = np.asarray(targets, dtype=np.float64).ravel()
    if p.size == 0:
        raise InsufficientDataError("empty batch")
    if p.shape != t.shape:
        raise ShapeError(f"{p.size} predictions vs {t.size} targets")
    r = t - p
    return float(np.mean(r * r))


def output_gradient(y_n, Y, batch_size: int = 1):
    """d/dY of (y_n - Y)^2 / batch_size, i.e. -2 (y_n - Y) / batch_size."""
    return -2.0 * (y_n - Y) / batch_size


def _check_trace(params: MlpParams, trace: ForwardTrace) -> None:
    if len(trace.pre_activations) != len(params.layers) or len(trace.activations) != len(params.layers):
        raise ShapeError("trace depth does not match the network")
    if trace.input.shape[-1] != params.input_dim:
        raise ShapeError("trace input does not match the network input dimension")
    for k, layer in enumerate(params.layers):
        if trace.pre_activations[k].shape[-1] != layer.spec.output_dim:
            raise ShapeError(f"trace layer {k} has width {trace.pre_activations[k].shape[-1]}, "
                             f"expected {layer.spec.output_dim}")


def backward(params: MlpParams, trace: ForwardTrace, output_grad: float) -> GradientSet:
    """Per-sample gradients of the loss term whose derivative at the output is ``output_grad``."""
    _check_trace(params, trace)
    if trace.input.ndim != 1:
        raise ShapeError("backward expects a single-sample trace; use batch_gradients for batches")
    n = len(params.layers)
    wg: list = [None] * n
    bg: list = [None] * n
    # gradient with respect to the output y^k of the current layer
    grad_y = np.array([output_grad], dtype=np.float64)
    for k in range(n - 1, -1, -1):
        layer = params.layers[k]
        delta = grad_y * _activation_derivative(layer.spec.activation, trace.pre_activations[k])
        y_prev = trace.activations[k - 1] if k > 0 else trace.input
        wg[k] = np.outer(delta, y_prev)
        bg[k] = delta
        grad_y = layer.weights.T @ delta
    return GradientSet(wg, bg)


def accumulate_batch_gradients(params: MlpParams, batch) -> tuple[GradientSet, float]:
    """Sum of per-sample ``backward`` results, added in batch order."""
    batch = list(batch)
    if not batch:
        raise InsufficientDataError("empty batch")
    b = len(batch)
    total = GradientSet.zeros_like(params)
    preds, targets = [], []
    for x, y_n in batch:
        Y, trace = forward(params, x)
        g = backward(params, trace, output_gradient(y_n, Y, b))
        for acc, add in zip(total.arrays(), g.arrays()):
            acc += add
        preds.append(Y)
        targets.append(y_n)
    return total, batch_loss(preds, targets)


def batch_gradients(params: MlpParams, X, y) -> tuple[GradientSet, float]:
    """Vectorised form of :func:`accumulate_batch_gradients` for a ``[B, d]`` batch."""
    y = np.asarray(y, dtype=np.float64).ravel()
    b = y.shape[0]
    if b == 0:
        raise InsufficientDataError("empty batch")
    preds, trace = forward_batch(params, X)
    if preds.shape[0] != b:
        raise ShapeError(f"{preds.shape[0]} inputs vs {b} targets")
    n = len(params.layers)
    wg: list = [None] * n
    bg: list = [None] * n
    grad_y = output_gradient(y, preds, b)[:, None]
    for k in range(n - 1, -1, -1):
        layer = params.layers[k]
        delta = grad_y * _activation_derivative(layer.spec.activation, trace.pre_activations[k])
        y_prev = trace.activations[k - 1] if k > 0 else trace.input
        wg[k] = delta.T @ y_prev
        bg[k] = delta.sum(axis=0)
        grad_y = delta @ layer.weights
    return GradientSet(wg, bg), batch_loss(preds, y)
