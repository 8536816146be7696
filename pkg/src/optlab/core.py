"""Parameter containers, the optimizer step contract, and step telemetry.

Every algorithm updates ParamBlocks in place through Optimizer.step, which
also enforces the shared contract: strictly increasing step indices, role
gating with a fallback rule for excluded blocks, and a finiteness check so
NaNs can never propagate silently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, DivergenceError, ShapeError

ROLES = ("hidden-matrix", "input-embedding", "output-head", "bias-vector")


def _buffer(a) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(a, dtype=np.float64))


@dataclass
class ParamBlock:
    """One trainable tensor (matrix or vector) with its current gradient."""

    id: str
    values: np.ndarray
    grad: np.ndarray
    role: str = "hidden-matrix"

    def __post_init__(self):
        self.values = _buffer(self.values)
        self.grad = _buffer(self.grad)
        if self.values.ndim not in (1, 2):
            raise ShapeError(f"block '{self.id}': only vectors and matrices supported")
        if self.grad.shape != self.values.shape:
            raise ShapeError(
                f"block '{self.id}': grad shape {self.grad.shape} "
                f"!= values shape {self.values.shape}"
            )
        if self.role not in ROLES:
            raise ConfigError(f"block '{self.id}': unknown role {self.role!r}")

    @property
    def kind(self) -> str:
        return "matrix" if self.values.ndim == 2 else "vector"

    @property
    def is_matrix(self) -> bool:
        return self.values.ndim == 2


@dataclass
class StepContext:
    """Per-step control inputs supplied by the training loop."""

    t: int
    eta_t: float
    lambda_t: float = 0.0
    epoch: int = 0
    rng_seed: int = 0

    def __post_init__(self):
        if self.t < 1:
            raise ConfigError(f"step index must be >= 1, got {self.t}")
        if self.eta_t < 0 or self.lambda_t < 0:
            raise ConfigError("eta_t and lambda_t must be nonnegative")


@dataclass
class GradStats:
    """Norm telemetry for one step; never mutates the blocks it reads."""

    global_grad_norm: float
    per_block_grad_norm: dict
    per_block_weight_norm: dict
    per_block_ratio: dict  # grad/weight norm; None where weight norm is 0
    equilibrium_target: Optional[float]  # sqrt(2 lambda_t / eta_t)


def grad_stats(blocks, ctx: StepContext) -> GradStats:
    gnorms, wnorms, ratios = {}, {}, {}
    sq_sum = 0.0
    for b in blocks:
        gn = float(np.linalg.norm(b.grad))
        wn = float(np.linalg.norm(b.values))
        gnorms[b.id] = gn
        wnorms[b.id] = wn
        ratios[b.id] = gn / wn if wn > 0 else None
        sq_sum += gn * gn
    target = math.sqrt(2.0 * ctx.lambda_t / ctx.eta_t) if ctx.eta_t > 0 else None
    return GradStats(math.sqrt(sq_sum), gnorms, wnorms, ratios, target)


class Optimizer:
    """Base class: role gating, fallback routing, and divergence detection.

    Subclasses implement _step over the blocks they handle; anything they
    exclude (via handles()) is routed to the fallback optimizer, AdamW by
    default, stepped with the same context.
    """

    name = "base"
    needs_cache = False

    def __init__(self, fallback: "Optimizer | None" = None):
        self._fallback = fallback
        self._last_t = 0

    def handles(self, block: ParamBlock) -> bool:
        return True

    def _step(self, blocks, ctx: StepContext, cache):
        raise NotImplementedError

    @property
    def fallback(self) -> "Optimizer":
        if self._fallback is None:
            from .first_order import Adam

            self._fallback = Adam(decay_mode="decoupled")
        return self._fallback

    def step(self, blocks, ctx: StepContext, cache=None):
        if ctx.t <= self._last_t:
            raise ConfigError(
                f"step index must be strictly increasing ({ctx.t} after {self._last_t})"
            )
        if self.needs_cache and cache is None:
            raise ConfigError(f"{self.name} requires a forward cache")
        for b in blocks:
            if not np.all(np.isfinite(b.grad)):
                raise DivergenceError(b.id, ctx.t)
        mine = [b for b in blocks if self.handles(b)]
        rest = [b for b in blocks if not self.handles(b)]
        self._step(mine, ctx, cache)
        if rest:
            self.fallback.step(rest, ctx)
        self._last_t = ctx.t
        for b in blocks:
            if not np.all(np.isfinite(b.values)):
                raise DivergenceError(b.id, ctx.t)
        return blocks

    def eval_values(self, block: ParamBlock) -> np.ndarray:
        """Weights to evaluate with; overridden by iterate-averaging rules."""
        return block.values


class PerBlockOptimizer(Optimizer):
    """Convenience base for rules that treat each block independently."""

    def _step(self, blocks, ctx: StepContext, cache):
        for b in blocks:
            self._update_block(b, ctx, None if cache is None else cache.get(b.id))

    def _update_block(self, block: ParamBlock, ctx: StepContext, layer_cache):
        raise NotImplementedError


@dataclass
class BlockState:
    """Per-block named buffers, created zeroed on first touch."""

    buffers: dict = field(default_factory=dict)

    def get(self, name: str, like: np.ndarray) -> np.ndarray:
        if name not in self.buffers:
            self.buffers[name] = np.zeros_like(like)
        return self.buffers[name]

    def get_init(self, name: str, value: np.ndarray) -> np.ndarray:
        if name not in self.buffers:
            self.buffers[name] = value.copy()
        return self.buffers[name]

    def has(self, name: str) -> bool:
        return name in self.buffers
