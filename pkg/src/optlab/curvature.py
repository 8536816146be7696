"""Kronecker-factored, eigenbasis, orthogonalized, and diagonal-Hessian
optimizers, plus the stochastic curvature estimators they consume.

Shared conventions: covariance factors are exponential moving averages of
per-example statistics averaged over the mini-batch; expensive refreshes
(inverses, eigenbases, matrix powers) run on a block's first update and
every `refresh_every` updates thereafter; weight decay is applied decoupled
before the preconditioned update.
"""
from __future__ import annotations

import numpy as np

from . import _kernels as K
from . import linalg
from .core import BlockState, Optimizer, ParamBlock, PerBlockOptimizer, StepContext
from .errors import ConfigError, CurvatureError, SingularMatrixError


def _decay(block: ParamBlock, ctx: StepContext):
    if ctx.lambda_t > 0.0:
        block.values *= 1.0 - ctx.eta_t * ctx.lambda_t


class _Curvature(PerBlockOptimizer):
    #: refresh every step this many times before going periodic; fresh
    #: covariance windows are rank-deficient (one mini-batch spans far fewer
    #: directions than the layer width) and a stale first inverse amplifies
    #: exactly the directions it has never seen
    warmup_refreshes = 5

    def __init__(self, beta2: float, refresh_every: int, fallback=None):
        super().__init__(fallback)
        if not 0.0 <= beta2 < 1.0:
            raise ConfigError("beta2 must be in [0, 1)")
        if refresh_every < 1:
            raise ConfigError("refresh period must be >= 1")
        self.beta2 = beta2
        self.refresh_every = refresh_every
        self._state: dict[str, BlockState] = {}

    def state_for(self, block: ParamBlock) -> BlockState:
        if block.id not in self._state:
            self._state[block.id] = BlockState()
        return self._state[block.id]

    def _tick(self, st: BlockState) -> bool:
        """Advance the per-block counter; True when caches are due a refresh."""
        k = st.buffers.get("k", 0) + 1
        st.buffers["k"] = k
        return k <= self.warmup_refreshes or k % self.refresh_every == 0

    def _ema(self, st: BlockState, name: str, sample: np.ndarray) -> np.ndarray:
        buf = st.buffers.get(name)
        if buf is None:
            buf = st.buffers[name] = np.zeros_like(sample)
        buf *= self.beta2
        buf += (1.0 - self.beta2) * sample
        return buf

    def _bias_correction(self, st: BlockState) -> float:
        """1 - beta2^k for the zero-initialized EMAs; without it the early
        covariance estimates are shrunk by this factor and their damped
        inverses overshoot by its reciprocal."""
        return 1.0 - self.beta2 ** st.buffers["k"]


def _damped_inverse(factor: np.ndarray, lam: float, layer_id: str) -> np.ndarray:
    damped = factor + lam * np.eye(factor.shape[0])
    try:
        np.linalg.cholesky(damped)
        return np.linalg.inv(damped)
    except np.linalg.LinAlgError as exc:
        raise CurvatureError(layer_id, f"damped factor not invertible ({exc})")


class Kfac(_Curvature):
    """Layer-wise natural-gradient preconditioning via the two Kronecker
    covariance factors: activities (with homogeneous coordinate) on the
    right, backprop signals on the left.

    The damped inverses (A + pi_A lambda I)^-1 and (S + pi_S lambda I)^-1
    are cached between refreshes; pi_A * pi_S = 1 is enforced by deriving
    pi_S from pi_A at construction.
    """

    name = "kfac"
    needs_cache = True

    def __init__(self, beta2=0.95, damping=0.03, pi_a=None, refresh_every=20,
                 fallback=None):
        super().__init__(beta2, refresh_every, fallback)
        if damping < 0:
            raise ConfigError("damping must be >= 0")
        if pi_a is not None and pi_a <= 0:
            raise ConfigError("pi_a must be positive")
        self.damping = damping
        self.pi_a = pi_a  # None selects the trace-balanced split per refresh

    def handles(self, block: ParamBlock) -> bool:
        return block.is_matrix

    def _pi(self, a_cov, s_cov):
        """Split of the damping across the two factors, pi_a * pi_s = 1.

        The default balances each factor's mean diagonal so neither side is
        drowned by (or starved of) its Tikhonov term when the activity and
        backprop scales differ by orders of magnitude.
        """
        if self.pi_a is not None:
            return self.pi_a, 1.0 / self.pi_a
        a_scale = float(np.trace(a_cov)) / a_cov.shape[0]
        s_scale = float(np.trace(s_cov)) / s_cov.shape[0]
        if a_scale <= 0.0 or s_scale <= 0.0:
            return 1.0, 1.0
        pi_a = np.sqrt(a_scale / s_scale)
        return pi_a, 1.0 / pi_a

    def _update_block(self, b, ctx, lc):
        if lc is None:
            raise ConfigError(f"{self.name}: no forward cache for block '{b.id}'")
        st = self.state_for(b)
        batch = lc.a_bar.shape[0]
        a_cov = self._ema(st, "A", lc.a_bar.T @ lc.a_bar / batch)
        s_cov = self._ema(st, "S", lc.delta.T @ lc.delta / batch)
        if self._tick(st):
            bc = self._bias_correction(st)
            pi_a, pi_s = self._pi(a_cov / bc, s_cov / bc)
            st.buffers["A_inv"] = _damped_inverse(a_cov / bc, pi_a * self.damping, b.id)
            st.buffers["S_inv"] = _damped_inverse(s_cov / bc, pi_s * self.damping, b.id)
        _decay(b, ctx)
        b.values -= ctx.eta_t * st.buffers["S_inv"] @ b.grad @ st.buffers["A_inv"]


class Ekfac(_Curvature):
    """Kronecker eigenbasis with a per-step diagonal second-moment estimate.

    Eigenbases of the covariance factors are recomputed infrequently; the
    diagonal scaling s* tracks the second moment of the rotated gradient
    every step, so curvature drift between eigenbasis refreshes is absorbed
    by the cheap part of the factorization.
    """

    name = "ekfac"
    needs_cache = True

    def __init__(self, beta2=0.95, damping=1e-3, refresh_every=20, fallback=None):
        super().__init__(beta2, refresh_every, fallback)
        if damping < 0:
            raise ConfigError("damping must be >= 0")
        self.damping = damping

    def handles(self, block: ParamBlock) -> bool:
        return block.is_matrix

    def _update_block(self, b, ctx, lc):
        if lc is None:
            raise ConfigError(f"{self.name}: no forward cache for block '{b.id}'")
        st = self.state_for(b)
        batch = lc.a_bar.shape[0]
        a_cov = self._ema(st, "A", lc.a_bar.T @ lc.a_bar / batch)
        s_cov = self._ema(st, "S", lc.delta.T @ lc.delta / batch)
        if self._tick(st):
            try:
                st.buffers["U_A"] = linalg.sym_eig(a_cov).eigenvectors
                st.buffers["U_S"] = linalg.sym_eig(s_cov).eigenvectors
            except np.linalg.LinAlgError as exc:
                raise CurvatureError(b.id, str(exc))
        u_a, u_s = st.buffers["U_A"], st.buffers["U_S"]
        g_rot = u_s.T @ b.grad @ u_a
        s_star = self._ema(st, "s_star", g_rot * g_rot)
        _decay(b, ctx)
        b.values -= ctx.eta_t * u_s @ (g_rot / (s_star + self.damping)) @ u_a.T


class Shampoo(_Curvature):
    """Left/right Gram-matrix preconditioning with fractional matrix powers.

    L accumulates G G^T and R accumulates G^T G; the cached powers
    (L + lam I)^-p and (R + lam I)^-p multiply the gradient from both sides.
    With accumulation and damping off and p = 1/4 the update collapses to
    the polar factor U V^T of the gradient.
    """

    name = "shampoo"

    def __init__(self, beta2=0.95, damping=1e-6, power=0.25, refresh_every=20,
                 fallback=None):
        super().__init__(beta2, refresh_every, fallback)
        if damping < 0 or power <= 0:
            raise ConfigError("need damping >= 0 and power > 0")
        self.damping = damping
        self.power = power

    def handles(self, block: ParamBlock) -> bool:
        return block.is_matrix

    def _update_block(self, b, ctx, lc):
        st = self.state_for(b)
        left = self._ema(st, "L", b.grad @ b.grad.T)
        right = self._ema(st, "R", b.grad.T @ b.grad)
        if self._tick(st):
            try:
                st.buffers["L_pow"] = linalg.psd_power(left, -self.power, self.damping)
                st.buffers["R_pow"] = linalg.psd_power(right, -self.power, self.damping)
            except SingularMatrixError as exc:
                raise CurvatureError(b.id, str(exc))
        _decay(b, ctx)
        b.values -= ctx.eta_t * st.buffers["L_pow"] @ b.grad @ st.buffers["R_pow"]


class Soap(_Curvature):
    """Adaptive second-moment rescaling inside the Gram eigenbasis.

    The eigenbases of the left/right Gram factors are refreshed
    infrequently; between refreshes the gradient is rotated in, rescaled by
    a per-coordinate running second moment (epsilon is the sole stabilizer
    in the denominator), and rotated back. Applied to hidden matrices only;
    other blocks take the fallback rule. An optional first moment over the
    rotated gradient is off by default.
    """

    name = "soap"

    def __init__(self, beta2=0.95, eps=1e-8, refresh_every=20, beta1=0.0,
                 fallback=None):
        super().__init__(beta2, refresh_every, fallback)
        if eps < 0:
            raise ConfigError("eps must be nonnegative")
        if not 0.0 <= beta1 < 1.0:
            raise ConfigError("beta1 must be in [0, 1)")
        self.eps = eps
        self.beta1 = beta1

    def handles(self, block: ParamBlock) -> bool:
        return block.is_matrix and block.role == "hidden-matrix"

    def _update_block(self, b, ctx, lc):
        st = self.state_for(b)
        left = self._ema(st, "L", b.grad @ b.grad.T)
        right = self._ema(st, "R", b.grad.T @ b.grad)
        if self._tick(st):
            try:
                st.buffers["U_L"] = linalg.sym_eig(left).eigenvectors
                st.buffers["U_R"] = linalg.sym_eig(right).eigenvectors
            except np.linalg.LinAlgError as exc:
                raise CurvatureError(b.id, str(exc))
        u_l, u_r = st.buffers["U_L"], st.buffers["U_R"]
        g_rot = u_l.T @ b.grad @ u_r
        if self.beta1 > 0.0:
            g_rot = self._ema_first(st, g_rot)
        v = self._ema(st, "V", g_rot * g_rot)
        g_hat = g_rot / (np.sqrt(v) + self.eps)
        _decay(b, ctx)
        b.values -= ctx.eta_t * u_l @ g_hat @ u_r.T

    def _ema_first(self, st, g_rot):
        m = st.buffers.get("M")
        if m is None:
            m = st.buffers["M"] = np.zeros_like(g_rot)
        m *= self.beta1
        m += (1.0 - self.beta1) * g_rot
        return m


class Splus(_Curvature):
    """Eigenbasis rotation with instantaneous Frobenius normalization,
    shape-aware step scaling eta * sqrt(d_out/d_in), and an iterate average
    used at evaluation time.

    A zero rotated gradient skips the update (guard); the iterate average
    still tracks the unchanged weights.
    """

    name = "splus"

    def __init__(self, beta2=0.95, refresh_every=20, averaging=0.99, fallback=None):
        super().__init__(beta2, refresh_every, fallback)
        if not 0.0 <= averaging < 1.0:
            raise ConfigError("averaging must be in [0, 1)")
        self.averaging = averaging

    def handles(self, block: ParamBlock) -> bool:
        return block.is_matrix

    def _update_block(self, b, ctx, lc):
        st = self.state_for(b)
        avg = st.get_init("w_avg", b.values)  # seeded from pre-update weights
        left = self._ema(st, "L", b.grad @ b.grad.T)
        right = self._ema(st, "R", b.grad.T @ b.grad)
        if self._tick(st):
            try:
                st.buffers["U_L"] = linalg.sym_eig(left).eigenvectors
                st.buffers["U_R"] = linalg.sym_eig(right).eigenvectors
            except np.linalg.LinAlgError as exc:
                raise CurvatureError(b.id, str(exc))
        u_l, u_r = st.buffers["U_L"], st.buffers["U_R"]
        g_rot = u_l.T @ b.grad @ u_r
        norm = float(np.linalg.norm(g_rot))
        if norm > 0.0:
            d_out, d_in = b.values.shape
            eta_eff = ctx.eta_t * np.sqrt(d_out / d_in)
            _decay(b, ctx)
            b.values -= eta_eff * u_l @ (g_rot / norm) @ u_r.T
        avg *= self.averaging
        avg += (1.0 - self.averaging) * b.values

    def eval_values(self, block: ParamBlock) -> np.ndarray:
        st = self._state.get(block.id)
        if st is not None and st.has("w_avg"):
            return st.buffers["w_avg"]
        return block.values


class Muon(PerBlockOptimizer):
    """Momentum (applied before orthogonalization) with a lookahead
    correction, pushed through the Newton-Schulz matrix-sign iteration.

    Hidden matrices only; everything else takes the fallback rule. The
    update direction is scale-invariant in the momentum buffer because the
    iteration normalizes its input.
    """

    name = "muon"

    def __init__(self, beta1=0.95, ns_steps=linalg.NS_STEPS,
                 ns_coeffs=linalg.NS_COEFFS, fallback=None):
        super().__init__(fallback)
        if not 0.0 <= beta1 < 1.0:
            raise ConfigError("beta1 must be in [0, 1)")
        self.beta1 = beta1
        self.ns_steps = ns_steps
        self.ns_coeffs = ns_coeffs
        self._state: dict[str, np.ndarray] = {}

    def handles(self, block: ParamBlock) -> bool:
        return block.is_matrix and block.role == "hidden-matrix"

    def _update_block(self, b, ctx, lc):
        m_prev = self._state.get(b.id)
        if m_prev is None:
            m_prev = np.zeros_like(b.grad)
        m_new = self.beta1 * m_prev + b.grad
        lookahead = m_new + self.beta1 * (m_new - m_prev)
        direction = linalg.newton_schulz_msign(lookahead, self.ns_steps, self.ns_coeffs)
        _decay(b, ctx)
        b.values -= ctx.eta_t * direction
        self._state[b.id] = m_new


class Sophia(PerBlockOptimizer):
    """Gradient EMA over a slowly refreshed diagonal Hessian EMA, with
    entrywise clipping bounding every coordinate's step by eta * clip.

    Diagonal Hessian estimates arrive from the caller (see
    hutchinson_diag_estimate / gnb_diag_estimate) on refresh steps, keyed by
    block id; negative estimates are neutralized by max(h, eps) plus the
    clip.
    """

    name = "sophia"

    def __init__(self, beta1=0.96, beta2=0.99, eps=1e-12, clip=1.0,
                 refresh_every=10, estimator="hutchinson", fallback=None):
        super().__init__(fallback)
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ConfigError("betas must be in [0, 1)")
        if clip <= 0 or eps <= 0:
            raise ConfigError("clip and eps must be positive")
        if estimator not in ("hutchinson", "gnb"):
            raise ConfigError(f"unknown estimator {estimator!r}")
        self.beta1, self.beta2 = beta1, beta2
        self.eps, self.clip = eps, clip
        self.refresh_every = refresh_every
        self.estimator = estimator
        self._state: dict[str, BlockState] = {}
        self._pending: dict | None = None

    def needs_hessian(self, t: int) -> bool:
        return t % self.refresh_every == 0

    def step(self, blocks, ctx, cache=None, hessian_estimate=None):
        if hessian_estimate is not None:
            self._pending = hessian_estimate
        return super().step(blocks, ctx, cache)

    def _update_block(self, b, ctx, lc):
        st = self._state.setdefault(b.id, BlockState())
        m = st.get("m", b.values)
        h = st.get("h", b.values)
        K.ema(K.flat(m), K.flat(b.grad), self.beta1)
        if self._pending is not None and b.id in self._pending:
            K.ema(K.flat(h), K.flat(np.ascontiguousarray(
                self._pending[b.id], dtype=np.float64)), self.beta2)
        _decay(b, ctx)
        K.sophia(K.flat(b.values), K.flat(m), K.flat(h), ctx.eta_t, self.eps, self.clip)

    def _step(self, blocks, ctx, cache):
        super()._step(blocks, ctx, cache)
        self._pending = None


def hvp_finite_difference(grad_oracle, w: np.ndarray, v: np.ndarray,
                          eps_fd: float = 1e-4) -> np.ndarray:
    """Forward-difference Hessian-vector product on a fixed mini-batch.

    Exact (up to rounding) on quadratics for any eps_fd > 0.
    """
    if eps_fd <= 0:
        raise ConfigError("eps_fd must be positive")
    return (grad_oracle(w + eps_fd * v) - grad_oracle(w)) / eps_fd


def hutchinson_diag_estimate(grad_oracle, w: np.ndarray, samples: int,
                             eps_fd: float, rng: np.random.Generator) -> np.ndarray:
    """Average of u * (H u) over Gaussian probes; unbiased for diag(H)."""
    if samples < 1:
        raise ConfigError("samples must be >= 1")
    acc = np.zeros_like(w)
    for _ in range(samples):
        u = rng.standard_normal(w.shape)
        acc += u * hvp_finite_difference(grad_oracle, w, u, eps_fd)
    return acc / samples


def gnb_diag_estimate(model, x: np.ndarray, rng: np.random.Generator) -> dict:
    """Gauss-Newton diagonal proxy from model-resampled labels.

    Labels are drawn from the model's own predictive distribution, the
    mini-batch mean gradient g-hat is taken against them, and B * g-hat^2 is
    returned per block. Entries are nonnegative by construction, and the
    label resampling makes per-example gradients zero-mean so the batch
    scaling B recovers the per-example second moment.
    """
    from .problems import sample_labels, softmax

    logits, trail = model.forward(x)
    probs = softmax(logits)
    sampled = sample_labels(probs, rng)
    delta = probs
    delta[np.arange(len(sampled)), sampled] -= 1.0
    grads, _ = model.manual_grads(trail, delta)
    batch = x.shape[0]
    return {
        block.id: batch * g * g for block, g in zip(model.blocks, grads)
    }
