"""Learning-rate schedules, preconditioner-synchronized spikes, scheduled
weight decay, and iterate averaging (EMA and bias-eliminating BEMA).

Schedule evaluation is pure; averagers own mutable state and are stepped
sequentially by one run.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, ScheduleExhaustedError, SequencingError

SCHEDULE_KINDS = (
    "constant",
    "warmup-stable-decay",
    "linear-decay",
    "cosine",
    "step",
    "exponential",
    "one-cycle",
    "constant-cooldown",
)

COOLDOWN_SHAPES = ("linear", "cosine", "sqrt")


def cooldown_value(phi: str, x: float) -> float:
    # x is cooldown progress in [0, 1]; all shapes run 1 -> 0.
    if phi == "linear":
        return 1.0 - x
    if phi == "cosine":
        return 0.5 * (1.0 + math.cos(math.pi * x))
    if phi == "sqrt":
        return math.sqrt(1.0 - x)
    raise ConfigError(f"unknown cooldown shape {phi!r}")


@dataclass
class ScheduleSpec:
    """One learning-rate control law; fields beyond `kind` apply per kind."""

    kind: str
    eta_max: float
    total: Optional[int] = None  # T, the horizon (required by decaying kinds)
    warmup: int = 0  # T_w
    stable: Optional[int] = None  # T_s
    shape: str = "linear"  # cooldown shape phi for warmup-stable-decay
    eta_min: float = 0.0  # cosine floor
    period: Optional[int] = None  # step kind
    factor: float = 0.1  # step kind
    rate: float = 0.99  # exponential kind: eta_max * rate**(t-1)
    peak_fraction: float = 0.3  # one-cycle
    hold: Optional[int] = None  # T_c for constant-cooldown

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if self.eta_max <= 0:
            raise ConfigError("eta_max must be positive")
        needs_total = self.kind in (
            "warmup-stable-decay", "linear-decay", "cosine", "one-cycle",
            "constant-cooldown",
        )
        if needs_total and (self.total is None or self.total < 1):
            raise ConfigError(f"schedule {self.kind} requires a horizon T >= 1")
        if self.kind == "warmup-stable-decay":
            if self.stable is None:
                self.stable = self.warmup
            if not 0 <= self.warmup <= self.stable <= self.total:
                raise ConfigError("need 0 <= T_w <= T_s <= T")
            if self.shape not in COOLDOWN_SHAPES:
                raise ConfigError(f"unknown cooldown shape {self.shape!r}")
        if self.kind == "step" and (self.period is None or self.period < 1):
            raise ConfigError("step schedule requires period >= 1")
        if self.kind == "constant-cooldown":
            if self.hold is None or not 0 <= self.hold < self.total:
                raise ConfigError("constant-cooldown requires 0 <= T_c < T")
        if self.kind == "one-cycle" and not 0.0 < self.peak_fraction < 1.0:
            raise ConfigError("peak_fraction must lie in (0, 1)")


def lr_at(spec: ScheduleSpec, t: int) -> float:
    """Learning rate at integer step t >= 1; overrunning T is an error."""
    if t < 1:
        raise ConfigError(f"step index must be >= 1, got {t}")
    if spec.total is not None and t > spec.total:
        raise ScheduleExhaustedError(f"step {t} past schedule horizon {spec.total}")
    k, em = spec.kind, spec.eta_max
    if k == "constant":
        return em
    if k == "warmup-stable-decay":
        if t <= spec.warmup:
            return em * t / spec.warmup
        if t <= spec.stable:
            return em
        return em * cooldown_value(spec.shape, (t - spec.stable) / (spec.total - spec.stable))
    if k == "linear-decay":
        return em * (1.0 - t / spec.total)
    if k == "cosine":
        return spec.eta_min + (em - spec.eta_min) * 0.5 * (
            1.0 + math.cos(math.pi * t / spec.total)
        )
    if k == "step":
        return em * spec.factor ** ((t - 1) // spec.period)
    if k == "exponential":
        return em * spec.rate ** (t - 1)
    if k == "one-cycle":
        t_peak = max(1, round(spec.peak_fraction * spec.total))
        if t <= t_peak:
            return em * t / t_peak
        return em * 0.5 * (1.0 + math.cos(math.pi * (t - t_peak) / (spec.total - t_peak)))
    if k == "constant-cooldown":
        if t <= spec.hold:
            return em
        return em * (1.0 - (t - spec.hold) / (spec.total - spec.hold))
    raise ConfigError(f"unknown schedule kind {k!r}")


@dataclass
class WeightDecaySpec:
    """Base coefficient plus the flag that ties it to the learning rate."""

    lambda_base: float = 0.0
    scheduled: bool = False

    def __post_init__(self):
        if self.lambda_base < 0:
            raise ConfigError("lambda_base must be nonnegative")


def wd_at(spec: WeightDecaySpec, eta_t: float, eta0: float) -> float:
    """Decay coefficient at a step; scheduled mode keeps lambda_t/eta_t fixed."""
    if spec.scheduled:
        if eta0 <= 0:
            raise ConfigError("scheduled weight decay needs eta0 > 0")
        return spec.lambda_base * eta_t / eta0
    return spec.lambda_base


@dataclass
class SpikeSpec:
    """Learning-rate spike synchronized with a preconditioner refresh period."""

    period: int
    factor: float = 1.0
    duration: int = 1

    def __post_init__(self):
        if self.period < 1 or self.duration < 1:
            raise ConfigError("period and duration must be >= 1")
        if self.duration >= self.period:
            raise ConfigError("duration must be smaller than period")
        if self.factor < 1.0:
            raise ConfigError("spike factor must be >= 1")


def spike_lr(eta_t: float, spike: Optional[SpikeSpec], t: int) -> float:
    """Multiply eta by the spike factor inside each window [k*period, k*period+duration)."""
    if spike is None:
        return eta_t
    if t >= spike.period and t % spike.period < spike.duration:
        return spike.factor * eta_t
    return eta_t


def ema_update(mu, w, beta: float, t: int, bias_correct: bool = True):
    """One EMA step; returns (new mu, corrected estimate).

    mu must start at zero for the 1 - beta^t correction to be exact.
    """
    if not 0.0 <= beta < 1.0:
        raise ConfigError("beta must be in [0, 1)")
    if t < 1:
        raise ConfigError("t must be >= 1")
    mu = beta * mu + (1.0 - beta) * w
    corrected = mu / (1.0 - beta**t) if bias_correct else mu
    return mu, corrected


@dataclass
class BemaParams:
    """Power-law averaging weights: alpha_t and beta_t both decay like
    (lag + multiplier*t)^(-power), with separate powers for the bias term
    and the EMA term."""

    bias_power: float = 0.5
    ema_power: float = 0.5
    lag: float = 1.0
    multiplier: float = 1.0
    burn_in: int = 0
    frequency: int = 1

    def __post_init__(self):
        if self.bias_power <= 0 or self.ema_power <= 0:
            raise ConfigError("bias_power and ema_power must be positive")
        if self.multiplier <= 0 or self.lag < 0:
            raise ConfigError("need multiplier > 0 and lag >= 0")
        if self.frequency < 1 or self.burn_in < 0:
            raise ConfigError("frequency >= 1 and burn_in >= 0 required")

    def alpha(self, t: int) -> float:
        return (self.lag + self.multiplier * t) ** (-self.bias_power)

    def beta(self, t: int) -> float:
        return (self.lag + self.multiplier * t) ** (-self.ema_power)


class BemaState:
    """Augmented averaging of one weight tensor: an EMA plus an explicit
    initialization-bias correction anchored at the burn-in snapshot."""

    def __init__(self, params: BemaParams):
        self.params = params
        self.mu = None
        self.w_tau = None

    def update(self, w: np.ndarray, t: int) -> np.ndarray:
        p = self.params
        if t < p.burn_in:
            raise SequencingError(f"BEMA update at t={t} before burn-in {p.burn_in}")
        if (t - p.burn_in) % p.frequency != 0:
            raise SequencingError(
                f"BEMA update at t={t} off the frequency-{p.frequency} grid"
            )
        if self.mu is None:
            self.w_tau = np.array(w, dtype=np.float64, copy=True)
            self.mu = self.w_tau.copy()
        beta_t = p.beta(t)
        self.mu = (1.0 - beta_t) * self.mu + beta_t * w
        return p.alpha(t) * (w - self.w_tau) + self.mu


class EmaWeights:
    """Weight-space EMA over a set of blocks, queried at evaluation time."""

    def __init__(self, beta: float, bias_correct: bool = True):
        if not 0.0 <= beta < 1.0:
            raise ConfigError("beta must be in [0, 1)")
        self.beta = beta
        self.bias_correct = bias_correct
        self._mu: dict[str, np.ndarray] = {}
        self._t = 0

    def update(self, blocks, t: int):
        self._t = t
        for b in blocks:
            mu = self._mu.setdefault(b.id, np.zeros_like(b.values))
            mu *= self.beta
            mu += (1.0 - self.beta) * b.values

    def snapshot(self, blocks) -> dict:
        out = {}
        for b in blocks:
            mu = self._mu.get(b.id)
            if mu is None:
                out[b.id] = b.values.copy()
            elif self.bias_correct:
                out[b.id] = mu / (1.0 - self.beta**self._t)
            else:
                out[b.id] = mu.copy()
        return out


class BemaWeights:
    """Per-block BEMA averaging driven by the training loop's step index."""

    def __init__(self, params: BemaParams):
        self.params = params
        self._states: dict[str, BemaState] = {}
        self._outputs: dict[str, np.ndarray] = {}

    def due(self, t: int) -> bool:
        p = self.params
        return t >= p.burn_in and (t - p.burn_in) % p.frequency == 0

    def update(self, blocks, t: int):
        if not self.due(t):
            return
        for b in blocks:
            st = self._states.setdefault(b.id, BemaState(self.params))
            self._outputs[b.id] = st.update(b.values, t)

    def snapshot(self, blocks) -> dict:
        return {
            b.id: self._outputs.get(b.id, b.values).copy() for b in blocks
        }
