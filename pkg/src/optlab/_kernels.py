"""Elementwise update kernels: numba-jitted hot path with a numpy twin.

Every optimizer's per-coordinate arithmetic lives here so the training loop
can fuse it into one pass over each parameter buffer. Each kernel has two
implementations with identical per-element arithmetic (no reductions), so
the backends agree bitwise. The active backend is chosen once at import from
the OPTLAB_BACKEND environment variable ("numba" or "numpy"); unset picks
numba when it is importable. BLAS/LAPACK-bound work (matmuls, eigh, svd)
stays in numpy, where numba has nothing to add.
"""
from __future__ import annotations

import math
import os

import numpy as np


def _sgd(w, g, lr):
    w -= lr * g


def _heavy_ball(w, g, w_prev, lr, rho):
    new = w - lr * g + rho * (w - w_prev)
    w_prev[:] = w
    w[:] = new


def _nesterov(w, g, buf, lr, rho):
    buf *= rho
    buf += g
    w -= lr * (g + rho * buf)


def _adagrad(w, g, acc, lr, eps):
    acc += g * g
    w -= lr * g / np.sqrt(acc + eps)


def _rmsprop(w, g, v, lr, beta2, eps):
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    w -= lr * g / (np.sqrt(v) + eps)


def _adam(w, g, m, v, lr, beta1, beta2, eps, bc1, bc2, decay_factor, coupled_lambda):
    if decay_factor != 1.0:
        w *= decay_factor
    if coupled_lambda != 0.0:
        g = g + coupled_lambda * w
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    w -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def _sign_momentum(w, g, m, lr, beta1, bc1):
    m *= beta1
    m += (1.0 - beta1) * g
    w -= lr * np.sign(m / bc1)


def _sophia(w, m, h, lr, eps, clip):
    ratio = m / np.maximum(h, eps)
    np.clip(ratio, -clip, clip, out=ratio)
    w -= lr * ratio


def _ema(mu, x, beta):
    mu *= beta
    mu += (1.0 - beta) * x


_NUMPY_IMPLS = {
    "sgd": _sgd,
    "heavy_ball": _heavy_ball,
    "nesterov": _nesterov,
    "adagrad": _adagrad,
    "rmsprop": _rmsprop,
    "adam": _adam,
    "sign_momentum": _sign_momentum,
    "sophia": _sophia,
    "ema": _ema,
}


def _build_numba_impls():
    from numba import njit

    @njit(cache=True)
    def sgd(w, g, lr):
        for i in range(w.shape[0]):
            w[i] -= lr * g[i]

    @njit(cache=True)
    def heavy_ball(w, g, w_prev, lr, rho):
        for i in range(w.shape[0]):
            new = w[i] - lr * g[i] + rho * (w[i] - w_prev[i])
            w_prev[i] = w[i]
            w[i] = new

    @njit(cache=True)
    def nesterov(w, g, buf, lr, rho):
        for i in range(w.shape[0]):
            buf[i] = rho * buf[i] + g[i]
            w[i] -= lr * (g[i] + rho * buf[i])

    @njit(cache=True)
    def adagrad(w, g, acc, lr, eps):
        for i in range(w.shape[0]):
            acc[i] += g[i] * g[i]
            w[i] -= lr * g[i] / math.sqrt(acc[i] + eps)

    @njit(cache=True)
    def rmsprop(w, g, v, lr, beta2, eps):
        omb = 1.0 - beta2
        for i in range(w.shape[0]):
            v[i] = beta2 * v[i] + omb * (g[i] * g[i])
            w[i] -= lr * g[i] / (math.sqrt(v[i]) + eps)

    @njit(cache=True)
    def adam(w, g, m, v, lr, beta1, beta2, eps, bc1, bc2, decay_factor, coupled_lambda):
        omb1 = 1.0 - beta1
        omb2 = 1.0 - beta2
        for i in range(w.shape[0]):
            if decay_factor != 1.0:
                w[i] *= decay_factor
            gi = g[i]
            if coupled_lambda != 0.0:
                gi = gi + coupled_lambda * w[i]
            m[i] = beta1 * m[i] + omb1 * gi
            v[i] = beta2 * v[i] + omb2 * (gi * gi)
            w[i] -= lr * (m[i] / bc1) / (math.sqrt(v[i] / bc2) + eps)

    @njit(cache=True)
    def sign_momentum(w, g, m, lr, beta1, bc1):
        omb1 = 1.0 - beta1
        for i in range(w.shape[0]):
            m[i] = beta1 * m[i] + omb1 * g[i]
            mhat = m[i] / bc1
            if mhat > 0.0:
                w[i] -= lr
            elif mhat < 0.0:
                w[i] += lr
            # mhat == 0 keeps the coordinate stationary

    @njit(cache=True)
    def sophia(w, m, h, lr, eps, clip):
        for i in range(w.shape[0]):
            ratio = m[i] / max(h[i], eps)
            w[i] -= lr * min(max(ratio, -clip), clip)

    @njit(cache=True)
    def ema(mu, x, beta):
        omb = 1.0 - beta
        for i in range(mu.shape[0]):
            mu[i] = beta * mu[i] + omb * x[i]

    return {
        "sgd": sgd,
        "heavy_ball": heavy_ball,
        "nesterov": nesterov,
        "adagrad": adagrad,
        "rmsprop": rmsprop,
        "adam": adam,
        "sign_momentum": sign_momentum,
        "sophia": sophia,
        "ema": ema,
    }


def _resolve_backend() -> str:
    requested = os.environ.get("OPTLAB_BACKEND", "").strip().lower()
    if requested not in ("", "numba", "numpy"):
        raise ValueError(f"OPTLAB_BACKEND must be 'numba' or 'numpy', got {requested!r}")
    try:
        import numba  # noqa: F401

        have_numba = True
    except ImportError:
        have_numba = False
    if requested == "numba" and not have_numba:
        raise ImportError("OPTLAB_BACKEND=numba but numba is not importable")
    if requested:
        return requested
    return "numba" if have_numba else "numpy"


BACKEND = _resolve_backend()
_IMPLS = _build_numba_impls() if BACKEND == "numba" else _NUMPY_IMPLS

sgd = _IMPLS["sgd"]
heavy_ball = _IMPLS["heavy_ball"]
nesterov = _IMPLS["nesterov"]
adagrad = _IMPLS["adagrad"]
rmsprop = _IMPLS["rmsprop"]
adam = _IMPLS["adam"]
sign_momentum = _IMPLS["sign_momentum"]
sophia = _IMPLS["sophia"]
ema = _IMPLS["ema"]


def implementations(backend: str) -> dict:
    """Kernel table for an explicit backend (used by tests and benchmarks)."""
    if backend == "numpy":
        return _NUMPY_IMPLS
    if backend == "numba":
        return _build_numba_impls()
    raise ValueError(f"unknown backend {backend!r}")


def flat(a: np.ndarray) -> np.ndarray:
    """Contiguous 1-D float64 view of a parameter buffer (no copy)."""
    assert a.dtype == np.float64 and a.flags.c_contiguous
    return a.reshape(-1)
