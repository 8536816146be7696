"""Classical and adaptive first-order update rules.

All rules here apply weight decay in decoupled form, w <- (1 - eta*lambda) w
before the gradient-based update, except Adam whose decay_mode selects
between none, coupled L2 (lambda*w added to the gradient), and decoupled.
Dual averaging ignores lambda_t: its own quadratic regularizer plays that
role. Bias-correction exponents count per-block updates so the denominators
1 - beta^t are never zero.
"""
from __future__ import annotations

import numpy as np

from . import _kernels as K
from .core import BlockState, Optimizer, ParamBlock, PerBlockOptimizer, StepContext
from .errors import ConfigError

DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_EPS = 1e-8


def _decay(block: ParamBlock, ctx: StepContext):
    if ctx.lambda_t > 0.0:
        block.values *= 1.0 - ctx.eta_t * ctx.lambda_t


class _Stateful(PerBlockOptimizer):
    def __init__(self, fallback=None):
        super().__init__(fallback)
        self._state: dict[str, BlockState] = {}

    def state_for(self, block: ParamBlock) -> BlockState:
        if block.id not in self._state:
            self._state[block.id] = BlockState()
        return self._state[block.id]

    def _bump(self, st: BlockState) -> int:
        st.buffers["t"] = st.buffers.get("t", 0) + 1
        return st.buffers["t"]


class Sgd(_Stateful):
    """Plain, heavy-ball, or Nesterov stochastic gradient descent.

    heavy-ball: w <- w - eta g + rho (w - w_prev).
    nesterov uses the standard buffer form b <- rho b + g,
    w <- w - eta (g + rho b), whose iterates track the lookahead point of the
    two-sequence recurrence (see tests for the exact correspondence).
    """

    name = "sgd"
    VARIANTS = ("plain", "heavy-ball", "nesterov")

    def __init__(self, momentum: float = 0.0, variant: str = "plain", fallback=None):
        super().__init__(fallback)
        if not 0.0 <= momentum < 1.0:
            raise ConfigError("momentum must be in [0, 1)")
        if variant not in self.VARIANTS:
            raise ConfigError(f"unknown sgd variant {variant!r}")
        self.momentum = momentum
        self.variant = variant

    def _update_block(self, b, ctx, layer_cache):
        st = self.state_for(b)
        _decay(b, ctx)
        w, g = K.flat(b.values), K.flat(b.grad)
        if self.variant == "plain":
            K.sgd(w, g, ctx.eta_t)
        elif self.variant == "heavy-ball":
            prev = st.get_init("w_prev", b.values)
            K.heavy_ball(w, g, K.flat(prev), ctx.eta_t, self.momentum)
        else:
            buf = st.get("momentum", b.values)
            K.nesterov(w, g, K.flat(buf), ctx.eta_t, self.momentum)


class DualAveraging(_Stateful):
    """Uniform gradient averaging with a closed-form proximal step.

    With the quadratic regularizer ||w||^2 / 2 the subproblem minimizer is
    w = -alpha_t * mean(g_1..g_t); alpha_t is taken from ctx.eta_t.
    """

    name = "dual-averaging"

    def _update_block(self, b, ctx, layer_cache):
        if ctx.eta_t <= 0:
            raise ConfigError("dual averaging needs alpha_t > 0")
        st = self.state_for(b)
        t = self._bump(st)
        gbar = st.get("gbar", b.values)
        gbar *= (t - 1) / t
        gbar += b.grad / t
        b.values[...] = -ctx.eta_t * gbar


class AdaGrad(_Stateful):
    """Per-coordinate scaling by the accumulated squared gradient."""

    name = "adagrad"

    def __init__(self, eps: float = 1e-10, fallback=None):
        super().__init__(fallback)
        self.eps = eps

    def _update_block(self, b, ctx, layer_cache):
        st = self.state_for(b)
        _decay(b, ctx)
        acc = st.get("acc", b.values)
        K.adagrad(K.flat(b.values), K.flat(b.grad), K.flat(acc), ctx.eta_t, self.eps)


class RmsProp(_Stateful):
    """Exponential moving average of squared gradients."""

    name = "rmsprop"

    def __init__(self, beta2: float = DEFAULT_BETA2, eps: float = DEFAULT_EPS, fallback=None):
        super().__init__(fallback)
        if not 0.0 <= beta2 < 1.0:
            raise ConfigError("beta2 must be in [0, 1)")
        self.beta2 = beta2
        self.eps = eps

    def _update_block(self, b, ctx, layer_cache):
        st = self.state_for(b)
        _decay(b, ctx)
        v = st.get("v", b.values)
        K.rmsprop(K.flat(b.values), K.flat(b.grad), K.flat(v), ctx.eta_t, self.beta2, self.eps)


class Adam(_Stateful):
    """Bias-corrected first/second moment EMAs with selectable decay mode."""

    name = "adam"
    DECAY_MODES = ("none", "coupled-l2", "decoupled")

    def __init__(
        self,
        beta1: float = DEFAULT_BETA1,
        beta2: float = DEFAULT_BETA2,
        eps: float = DEFAULT_EPS,
        decay_mode: str = "none",
        fallback=None,
    ):
        super().__init__(fallback)
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ConfigError("betas must be in [0, 1)")
        if decay_mode not in self.DECAY_MODES:
            raise ConfigError(f"unknown decay_mode {decay_mode!r}")
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.decay_mode = decay_mode

    def _update_block(self, b, ctx, layer_cache):
        st = self.state_for(b)
        t = self._bump(st)
        m = st.get("m", b.values)
        v = st.get("v", b.values)
        decay_factor = 1.0
        coupled = 0.0
        if self.decay_mode == "decoupled":
            decay_factor = 1.0 - ctx.eta_t * ctx.lambda_t
        elif self.decay_mode == "coupled-l2":
            coupled = ctx.lambda_t
        K.adam(
            K.flat(b.values), K.flat(b.grad), K.flat(m), K.flat(v),
            ctx.eta_t, self.beta1, self.beta2, self.eps,
            1.0 - self.beta1**t, 1.0 - self.beta2**t,
            decay_factor, coupled,
        )


def AdamW(beta1=DEFAULT_BETA1, beta2=DEFAULT_BETA2, eps=DEFAULT_EPS, fallback=None) -> Adam:
    return Adam(beta1=beta1, beta2=beta2, eps=eps, decay_mode="decoupled", fallback=fallback)


class SignSgd(_Stateful):
    """Sign of the bias-corrected momentum; sign(0) keeps a coordinate still."""

    name = "signsgd"

    def __init__(self, beta1: float = DEFAULT_BETA1, fallback=None):
        super().__init__(fallback)
        if not 0.0 <= beta1 < 1.0:
            raise ConfigError("beta1 must be in [0, 1)")
        self.beta1 = beta1

    def _update_block(self, b, ctx, layer_cache):
        st = self.state_for(b)
        t = self._bump(st)
        _decay(b, ctx)
        m = st.get("m", b.values)
        K.sign_momentum(
            K.flat(b.values), K.flat(b.grad), K.flat(m),
            ctx.eta_t, self.beta1, 1.0 - self.beta1**t,
        )


class Prodigy(Optimizer):
    """Sign descent whose step size warms itself up.

    The step-size candidate g.(w0 - w) / ||g||_1 is computed over the
    concatenation of all blocks; the weights move with the current step size
    and the maximum is taken afterwards, so eta_auto is monotone
    nondecreasing. A zero gradient leaves both weights and step size alone.
    Applied uniformly to every block regardless of role.
    """

    name = "prodigy"

    def __init__(self, eta0: float = 1e-6, fallback=None):
        super().__init__(fallback)
        if eta0 <= 0:
            raise ConfigError("eta0 must be positive")
        self.eta_auto = eta0
        self._w0: dict[str, np.ndarray] = {}

    def _step(self, blocks, ctx, cache):
        numer = 0.0
        denom = 0.0
        for b in blocks:
            if b.id not in self._w0:
                self._w0[b.id] = b.values.copy()
            numer += float(np.sum(b.grad * (self._w0[b.id] - b.values)))
            denom += float(np.sum(np.abs(b.grad)))
        if denom == 0.0:
            return
        for b in blocks:
            if ctx.lambda_t > 0.0:
                b.values *= 1.0 - self.eta_auto * ctx.lambda_t
            b.values -= self.eta_auto * np.sign(b.grad)
        self.eta_auto = max(self.eta_auto, numer / denom)
