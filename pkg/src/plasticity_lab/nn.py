"""Minimal dense network with manual backprop, heavy-ball SGD, and a
train-to-accuracy loop.

Kept deliberately small: rectifier hidden layers, softmax + cross-entropy
output, no normalization or regularization, so the reinitialization methods
operate on an unambiguous parameter set. Training runs in single precision by
default; tests instantiate float64 nets for tight gradient checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


@dataclass
class DenseNet:
    weights: list[np.ndarray]  # per layer, shape (out, in)
    biases: list[np.ndarray]  # per layer, shape (out,)

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.biases):
            raise ValueError("weights/biases length mismatch")
        for w, b in zip(self.weights, self.biases):
            if w.shape[0] != b.shape[0]:
                raise ValueError(f"bias shape {b.shape} != rows of {w.shape}")
        for prev, nxt in zip(self.weights, self.weights[1:]):
            if nxt.shape[1] != prev.shape[0]:
                raise ValueError("consecutive layer dims incompatible")

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def dtype(self):
        return self.weights[0].dtype

    def copy(self) -> "DenseNet":
        return DenseNet([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def parameters(self) -> list[np.ndarray]:
        return list(self.weights) + list(self.biases)


def init_net(layer_dims: Sequence[int], rng: np.random.Generator, dtype=np.float32) -> DenseNet:
    """Uniform fan-in scaled initialization, deterministic under the rng."""
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims, layer_dims[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return DenseNet(weights, biases)


@dataclass
class OptimState:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 128
    weight_momenta: list[np.ndarray] = field(default_factory=list)
    bias_momenta: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_net(cls, net: DenseNet, learning_rate: float = 0.01,
                momentum: float = 0.9, batch_size: int = 128) -> "OptimState":
        return cls(
            learning_rate=learning_rate,
            momentum=momentum,
            batch_size=batch_size,
            weight_momenta=[np.zeros_like(w) for w in net.weights],
            bias_momenta=[np.zeros_like(b) for b in net.biases],
        )


@dataclass
class LabeledDataset:
    features: np.ndarray  # (n, d)
    labels: np.ndarray  # (n,), ints in [0, C)

    def __post_init__(self) -> None:
        if self.features.ndim != 2 or self.labels.ndim != 1:
            raise ValueError("features must be 2-D and labels 1-D")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("row count mismatch between features and labels")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dimension(self) -> int:
        return self.features.shape[1]


@dataclass
class TrainControl:
    target_train_accuracy: float = 0.999
    max_steps: int = 200_000
    eval_interval: int = 50

    def __post_init__(self) -> None:
        if not 0.0 <= self.target_train_accuracy <= 1.0:
            raise ValueError("target accuracy must lie in [0, 1]")
        if self.max_steps < 1 or self.eval_interval < 1:
            raise ValueError("max_steps and eval_interval must be positive")


def forward(net: DenseNet, inputs: np.ndarray) -> np.ndarray:
    """Logits for a batch; rectifier on all layers but the last."""
    if inputs.shape[1] != net.weights[0].shape[1]:
        raise ValueError(
            f"input dim {inputs.shape[1]} != layer-0 dim {net.weights[0].shape[1]}"
        )
    a = inputs
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        a = a @ w.T + b
        if i != last:
            a = np.maximum(a, 0.0)
    return a


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grad(
    net: DenseNet, inputs: np.ndarray, labels: np.ndarray
) -> tuple[float, tuple[list[np.ndarray], list[np.ndarray]]]:
    """Mean cross-entropy and its gradients w.r.t. every parameter."""
    if inputs.shape[0] == 0:
        raise ValueError("empty batch")
    n = inputs.shape[0]
    last = len(net.weights) - 1
    activations = [inputs]
    pre = []
    a = inputs
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        pre.append(z)
        a = np.maximum(z, 0.0) if i != last else z
        activations.append(a)
    probs = _softmax(activations[-1])
    eps = np.finfo(probs.dtype).tiny
    loss = float(-np.mean(np.log(probs[np.arange(n), labels] + eps)))

    delta = probs
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    w_grads: list[Optional[np.ndarray]] = [None] * len(net.weights)
    b_grads: list[Optional[np.ndarray]] = [None] * len(net.biases)
    for i in range(last, -1, -1):
        w_grads[i] = delta.T @ activations[i]
        b_grads[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ net.weights[i]) * (pre[i - 1] > 0)
    return loss, (w_grads, b_grads)


def sgd_momentum_step(
    net: DenseNet,
    opt: OptimState,
    grads: tuple[list[np.ndarray], list[np.ndarray]],
) -> None:
    """Classical heavy-ball update, in place: buffer <- m*buffer + grad,
    param <- param - lr*buffer."""
    w_grads, b_grads = grads
    if len(w_grads) != len(net.weights):
        raise ValueError("gradient/parameter layer count mismatch")
    for w, v, g in zip(net.weights, opt.weight_momenta, w_grads):
        if g.shape != w.shape:
            raise ValueError("gradient shape mismatch")
        v *= opt.momentum
        v += g
        w -= opt.learning_rate * v
    for b, v, g in zip(net.biases, opt.bias_momenta, b_grads):
        v *= opt.momentum
        v += g
        b -= opt.learning_rate * v


def evaluate_accuracy(net: DenseNet, data: LabeledDataset) -> float:
    """Argmax-match fraction; argmax ties resolve to the lowest class."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    preds = np.argmax(forward(net, data.features), axis=1)
    return float(np.mean(preds == data.labels))


def train_until(
    net: DenseNet,
    opt: OptimState,
    data: LabeledDataset,
    control: TrainControl,
    rng: np.random.Generator,
) -> tuple[int, bool]:
    """Shuffled mini-batch epochs until train accuracy reaches the target or
    the step cap is hit. Returns (optimizer steps executed, converged flag);
    running out of steps is reported, not raised."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    if control.target_train_accuracy == 0.0 or evaluate_accuracy(net, data) >= control.target_train_accuracy:
        return 0, True
    n = len(data)
    steps = 0
    while steps < control.max_steps:
        order = rng.permutation(n)
        for start in range(0, n, opt.batch_size):
            idx = order[start : start + opt.batch_size]
            _, grads = loss_and_grad(net, data.features[idx], data.labels[idx])
            sgd_momentum_step(net, opt, grads)
            steps += 1
            if steps % control.eval_interval == 0 or steps >= control.max_steps:
                if evaluate_accuracy(net, data) >= control.target_train_accuracy:
                    return steps, True
                if steps >= control.max_steps:
                    return steps, False
        # epoch boundary check keeps short datasets from overshooting
        if evaluate_accuracy(net, data) >= control.target_train_accuracy:
            return steps, True
    return steps, False
