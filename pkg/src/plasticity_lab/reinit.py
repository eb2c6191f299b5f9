"""Weight reinitialization between experiments: direction-aware shrinking,
shrink-and-perturb, and momentum reset.

Direction-aware shrinking scales each neuron's incoming weight vector by
max(min_shrink, cos(-G, w)), where G is an exponential moving average of the
per-chunk loss gradients taken at the current parameters, newest chunk
weighted most. Neurons aligned with the descent direction are treated as
carrying learned features and kept; unaligned neurons are shrunk toward zero
so they can be rewritten.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .nn import DenseNet, LabeledDataset, OptimState, loss_and_grad


@dataclass
class EmaGradient:
    weight_grads: list[np.ndarray]
    bias_grads: list[np.ndarray]

    def matches(self, net: DenseNet) -> bool:
        return len(self.weight_grads) == len(net.weights) and all(
            g.shape == w.shape for g, w in zip(self.weight_grads, net.weights)
        )


@dataclass(frozen=True)
class DashConfig:
    alpha: float = 0.3  # chunk-gradient averaging coefficient
    min_shrink: float = 0.3  # floor on the per-neuron scale factor
    interval: int = 1  # apply only on experiments divisible by this

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 < self.min_shrink <= 1.0:
            raise ValueError("min_shrink must lie in (0, 1]")
        if self.interval < 1:
            raise ValueError("interval must be >= 1")


@dataclass(frozen=True)
class SpConfig:
    shrink: float = 0.3
    noise_std: float = 0.01

    def __post_init__(self) -> None:
        if not 0.0 < self.shrink <= 1.0:
            raise ValueError("shrink factor must lie in (0, 1]")
        if self.noise_std < 0.0:
            raise ValueError("noise std must be non-negative")


def _chunk_gradient(
    net: DenseNet, chunk: LabeledDataset, batch_size: int
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Mean gradient over a whole chunk at fixed parameters, accumulated in
    batches so memory stays bounded."""
    n = len(chunk)
    w_total = [np.zeros_like(w, dtype=np.float64) for w in net.weights]
    b_total = [np.zeros_like(b, dtype=np.float64) for b in net.biases]
    for start in range(0, n, batch_size):
        x = chunk.features[start : start + batch_size]
        y = chunk.labels[start : start + batch_size]
        _, (wg, bg) = loss_and_grad(net, x, y)
        frac = x.shape[0] / n
        for acc, g in zip(w_total, wg):
            acc += frac * g
        for acc, g in zip(b_total, bg):
            acc += frac * g
    dtype = net.dtype
    return [g.astype(dtype) for g in w_total], [g.astype(dtype) for g in b_total]


def ema_chunk_gradients(
    net: DenseNet,
    chunks: Sequence[LabeledDataset],
    alpha: float,
    batch_size: int = 128,
) -> EmaGradient:
    """EMA of per-chunk gradients, oldest chunk first so recent data carries
    the most weight. The network is left untouched.

    alpha = 0 degenerates the recurrence, and is interpreted as "gradient of
    the current data only" (the data-discarding mode): the newest chunk's
    gradient is returned as-is.
    """
    if not chunks:
        raise ValueError("need at least one chunk")
    if alpha == 0.0:
        wg, bg = _chunk_gradient(net, chunks[-1], batch_size)
        return EmaGradient(wg, bg)
    w_ema = [np.zeros_like(w) for w in net.weights]
    b_ema = [np.zeros_like(b) for b in net.biases]
    for chunk in chunks:
        wg, bg = _chunk_gradient(net, chunk, batch_size)
        for e, g in zip(w_ema, wg):
            e *= 1.0 - alpha
            e += alpha * g
        for e, g in zip(b_ema, bg):
            e *= 1.0 - alpha
            e += alpha * g
    return EmaGradient(w_ema, b_ema)


def cosine_alignment(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors; 0 when either is zero, since
    a zero vector carries no directional evidence."""
    if a.shape != b.shape:
        raise ValueError(f"length mismatch {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def dash_apply(net: DenseNet, ema: EmaGradient, min_shrink: float) -> DenseNet:
    """Shrink each neuron's incoming weights by max(min_shrink, alignment
    with the negative EMA gradient). Biases are left alone: a scalar has no
    meaningful direction. Returns the modified net (mutated in place)."""
    if not 0.0 < min_shrink <= 1.0:
        raise ValueError("min_shrink must lie in (0, 1]")
    if not ema.matches(net):
        raise ValueError("EMA gradient does not match network shape")
    for w, g in zip(net.weights, ema.weight_grads):
        for row in range(w.shape[0]):
            s = cosine_alignment(-g[row], w[row])
            w[row] *= max(min_shrink, s)
    return net


def sp_apply(net: DenseNet, cfg: SpConfig, rng: np.random.Generator) -> DenseNet:
    """Scale every parameter by a constant and add Gaussian noise."""
    for p in net.parameters():
        noise = rng.normal(0.0, cfg.noise_std, size=p.shape).astype(p.dtype)
        p *= cfg.shrink
        p += noise
    return net


def momentum_reset(opt: OptimState) -> OptimState:
    """Zero all momentum buffers in place; parameters are untouched."""
    for v in opt.weight_momenta + opt.bias_momenta:
        v[...] = 0.0
    return opt
