"""Test objectives and the 3-layer MLP with manual differentiation.

The MLP folds biases into each weight matrix through a homogeneous input
coordinate (a constant 1 appended to every layer input), so one matrix per
layer carries the whole parameterization and the per-layer gradient is the
batch mean of delta a_bar^T. The per-example activities and backprop signals
are cached for the Kronecker-factored optimizers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ParamBlock
from .errors import ShapeError


def rosenbrock_eval(x: float, y: float):
    """Value and analytic gradient of (1-x)^2 + 100 (y - x^2)^2.

    Evaluated in float64 so a diverging iterate yields inf, which callers
    record as divergence rather than crash on.
    """
    x = np.float64(x)
    y = np.float64(y)
    with np.errstate(over="ignore", invalid="ignore"):
        f = (1.0 - x) ** 2 + 100.0 * (y - x * x) ** 2
        gx = -2.0 * (1.0 - x) - 400.0 * x * (y - x * x)
        gy = 200.0 * (y - x * x)
    return float(f), (float(gx), float(gy))


@dataclass
class LayerCache:
    """Per-example quantities for one layer, batch along the first axis."""

    a_bar: np.ndarray  # inputs with homogeneous 1 appended, B x (d_in+1)
    pre_act: np.ndarray  # s = a_bar W^T, B x d_out
    delta: np.ndarray  # dLoss_sum/ds per example (softmax - onehot at the top)


def _append_one(a: np.ndarray) -> np.ndarray:
    return np.hstack([a, np.ones((a.shape[0], 1))])


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class Mlp:
    """Fully-connected ReLU network with 10-way (or n-way) softmax output.

    dims is the full dimension chain, e.g. [256, 256, 256, 10]. Every layer
    is one matrix block of shape (d_out, d_in + 1); all layers carry the
    hidden-matrix role except the final one, which is tagged output-head so
    2D-only optimizers route it to their fallback rule.
    """

    def __init__(self, dims, seed: int = 0, activation: str = "relu"):
        if len(dims) < 2:
            raise ShapeError("need at least an input and an output dimension")
        if activation not in ("relu", "identity"):
            raise ShapeError(f"unknown activation {activation!r}")
        self.dims = list(dims)
        self.activation = activation
        rng = np.random.default_rng(seed)
        self.blocks: list[ParamBlock] = []
        n_layers = len(dims) - 1
        for layer in range(n_layers):
            d_in, d_out = dims[layer], dims[layer + 1]
            scale = np.sqrt(2.0 / d_in) if layer < n_layers - 1 else np.sqrt(1.0 / d_in)
            w = np.zeros((d_out, d_in + 1))
            w[:, :d_in] = rng.normal(size=(d_out, d_in)) * scale
            self.blocks.append(
                ParamBlock(
                    id=f"layer{layer}",
                    values=w,
                    grad=np.zeros_like(w),
                    role="hidden-matrix" if layer < n_layers - 1 else "output-head",
                )
            )

    @property
    def n_classes(self) -> int:
        return self.dims[-1]

    def _weights(self, weights=None):
        if weights is None:
            return [b.values for b in self.blocks]
        return [weights[b.id] for b in self.blocks]

    def _act(self, s: np.ndarray) -> np.ndarray:
        if self.activation == "relu":
            return np.maximum(s, 0.0)
        return s

    def _act_grad(self, s: np.ndarray) -> np.ndarray:
        if self.activation == "relu":
            # subgradient 0 at exactly 0: deterministic and FD-testable
            return (s > 0.0).astype(np.float64)
        return np.ones_like(s)

    def forward(self, x: np.ndarray, weights=None):
        """Logits plus the per-layer (a_bar, pre_act) pairs."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dims[0]:
            raise ShapeError(
                f"batch must be (B, {self.dims[0]}), got {x.shape}"
            )
        ws = self._weights(weights)
        a = x
        trail = []
        for layer, w in enumerate(ws):
            a_bar = _append_one(a)
            s = a_bar @ w.T
            trail.append((a_bar, s))
            a = self._act(s) if layer < len(ws) - 1 else s
        return a, trail

    def loss(self, x, y, weights=None) -> float:
        logits, _ = self.forward(x, weights)
        return _mean_cross_entropy(logits, np.asarray(y))

    def predict(self, x, weights=None) -> np.ndarray:
        logits, _ = self.forward(x, weights)
        return np.argmax(logits, axis=1)

    def accuracy(self, x, y, weights=None) -> float:
        return float(np.mean(self.predict(x, weights) == np.asarray(y)))

    def forward_backward(self, x, y):
        """Mean loss, per-block gradients and the curvature cache.

        Gradients are written into each block's grad buffer and also
        returned; cache deltas are per example (no 1/B), so the gradient is
        exactly the batch mean of delta a_bar^T.
        """
        y = np.asarray(y)
        logits, trail = self.forward(x)
        loss = _mean_cross_entropy(logits, y)
        delta = softmax(logits)
        delta[np.arange(len(y)), y] -= 1.0
        grads, cache = self.manual_grads(trail, delta)
        for b, g in zip(self.blocks, grads):
            b.grad[...] = g
        return loss, [b.grad for b in self.blocks], cache

    def sampled_label_cache(self, x, rng: np.random.Generator):
        """Curvature cache with backprop signals from model-sampled labels.

        Runs a second backward pass against labels drawn from the model's
        own predictive distribution; block gradients are left untouched.
        """
        logits, trail = self.forward(x)
        delta = softmax(logits)
        sampled = sample_labels(delta, rng)
        delta[np.arange(len(sampled)), sampled] -= 1.0
        _, cache = self.manual_grads(trail, delta)
        return cache

    def manual_grads(self, trail, top_delta):
        """Backpropagate an output-delta; pure (blocks are not written).

        Returns ([grad per layer], {block id -> LayerCache}).
        """
        batch = top_delta.shape[0]
        cache: dict[str, LayerCache] = {}
        grads: list[np.ndarray] = [None] * len(self.blocks)
        delta = top_delta
        for layer in range(len(self.blocks) - 1, -1, -1):
            a_bar, s = trail[layer]
            cache[self.blocks[layer].id] = LayerCache(a_bar, s, delta)
            grads[layer] = delta.T @ a_bar / batch
            if layer > 0:
                w_no_bias = self.blocks[layer].values[:, :-1]
                _, s_prev = trail[layer - 1]
                delta = (delta @ w_no_bias) * self._act_grad(s_prev)
        return grads, cache

    def flat_weights(self) -> np.ndarray:
        return np.concatenate([b.values.ravel() for b in self.blocks])

    def set_flat_weights(self, vec: np.ndarray):
        offset = 0
        for b in self.blocks:
            n = b.values.size
            b.values[...] = vec[offset : offset + n].reshape(b.values.shape)
            offset += n
        if offset != vec.size:
            raise ShapeError(f"flat vector has {vec.size} entries, model needs {offset}")

    def flat_grad(self, x, y) -> np.ndarray:
        """Gradient of the mean loss at the current weights, flattened."""
        self.forward_backward(x, y)
        return np.concatenate([b.grad.ravel() for b in self.blocks])

    def unflatten(self, vec: np.ndarray) -> dict:
        """Split a flat parameter-sized vector into per-block arrays."""
        out, offset = {}, 0
        for b in self.blocks:
            n = b.values.size
            out[b.id] = vec[offset : offset + n].reshape(b.values.shape).copy()
            offset += n
        if offset != vec.size:
            raise ShapeError(f"flat vector has {vec.size} entries, model needs {offset}")
        return out


def sample_labels(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw one class index per row from row-stochastic probabilities."""
    cum = np.cumsum(probs, axis=1)
    u = rng.random((len(probs), 1))
    return (u > cum).sum(axis=1)


def _mean_cross_entropy(logits: np.ndarray, y: np.ndarray) -> float:
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    return float(np.mean(lse - z[np.arange(len(y)), y]))
