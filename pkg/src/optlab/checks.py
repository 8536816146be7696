"""The release-gate invariant suite behind the `check` CLI command.

Each check re-derives one of the package's structural guarantees from
scratch on seeded inputs and reports pass/fail; the runner exits nonzero
with the failing names. Checks resolve functions through their home modules
at call time, so a corrupted implementation (or a fault injected by the test
harness) is caught by name.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import control, curvature, first_order, linalg, modular
from .core import ParamBlock, StepContext, grad_stats
from .problems import Mlp


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _ok(name, detail=""):
    return CheckResult(name, True, detail)


def _fail(name, detail):
    return CheckResult(name, False, detail)


def check_factorization_residuals():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(10):
        a = rng.normal(size=(7, 7))
        a = a + a.T
        e = linalg.sym_eig(a)
        res = np.linalg.norm(a - (e.eigenvectors * e.eigenvalues) @ e.eigenvectors.T)
        worst = max(worst, res / max(1.0, np.linalg.norm(a)))
        g = rng.normal(size=(5, 9))
        s = linalg.svd(g)
        res = np.linalg.norm(g - (s.u * s.sigma) @ s.v.T)
        worst = max(worst, res / max(1.0, np.linalg.norm(g)))
    if worst > 1e-10:
        return _fail("factorization-residuals", f"worst residual {worst:.3e}")
    return _ok("factorization-residuals", f"worst residual {worst:.3e}")


def check_psd_power_group_law():
    rng = np.random.default_rng(12)
    for _ in range(5):
        q = linalg.qr_orthonormal(rng.normal(size=(6, 6)))
        a = (q * rng.uniform(0.1, 10.0, size=6)) @ q.T
        for p, r in ((0.5, 0.5), (0.25, -0.25), (1.0, -1.0)):
            lhs = linalg.psd_power(a, p, 0.0) @ linalg.psd_power(a, r, 0.0)
            rhs = linalg.psd_power(a, p + r, 0.0)
            if np.linalg.norm(lhs - rhs) > 1e-9 * max(1.0, np.linalg.norm(rhs)):
                return _fail("psd-power-group-law", f"p={p}, q={r}")
    return _ok("psd-power-group-law")


def check_newton_schulz():
    rng = np.random.default_rng(13)
    m = rng.normal(size=(12, 6))
    base = linalg.newton_schulz_msign(m)
    # power-of-two scaling is exact in floating point, so bitwise holds
    if not np.array_equal(base, linalg.newton_schulz_msign(4.0 * m)):
        return _fail("newton-schulz", "not scale-invariant (exact scaling)")
    if not np.allclose(base, linalg.newton_schulz_msign(3.7 * m), rtol=1e-10,
                       atol=1e-12):
        return _fail("newton-schulz", "not scale-invariant (inexact scaling)")
    if np.any(linalg.newton_schulz_msign(np.zeros((4, 3)))):
        return _fail("newton-schulz", "zero guard broken")
    s = linalg.svd(m)
    dist = np.linalg.norm(base - s.u @ s.v.T) / np.linalg.norm(s.u @ s.v.T)
    if dist > 0.5:
        return _fail("newton-schulz", f"polar distance {dist:.3f}")
    return _ok("newton-schulz", f"polar distance {dist:.3f}")


def check_duality_holder():
    rng = np.random.default_rng(14)
    for kind, shape in (("euclid", (24,)), ("max-of-max", (6, 5)),
                        ("spectral", (6, 5)), ("rms-to-rms", (6, 5))):
        for _ in range(10):
            g = rng.normal(size=shape)
            inner = float(np.sum(g * modular.dualize(g, kind)))
            dual = modular.dual_norm(g, kind)
            if abs(inner - dual) > 1e-10 * max(1.0, dual):
                return _fail("duality-holder", f"{kind}: {inner} vs {dual}")
    return _ok("duality-holder")


def check_dualize_unit_norm():
    rng = np.random.default_rng(15)
    g = rng.normal(size=(7, 4))
    sv = np.linalg.svd(modular.dualize(g, "spectral"), compute_uv=False)
    if abs(sv[0] - 1.0) > 1e-10:
        return _fail("dualize-unit-norm", "spectral map not unit norm")
    m = modular.dualize(g, "rms-to-rms")
    rms_norm = math.sqrt(4 / 7) * np.linalg.svd(m, compute_uv=False)[0]
    if abs(rms_norm - 1.0) > 1e-10:
        return _fail("dualize-unit-norm", "rms-to-rms map not unit norm")
    s = modular.dualize(g, "max-of-max")
    if abs(np.max(np.abs(s)) - 1.0) > 0:
        return _fail("dualize-unit-norm", "sign map not unit norm")
    return _ok("dualize-unit-norm")


def check_modular_sign_equivalence():
    rng = np.random.default_rng(16)
    blocks = [
        ParamBlock("a", rng.normal(size=(4, 3)), rng.normal(size=(4, 3))),
        ParamBlock("b", rng.normal(size=5), rng.normal(size=5), role="bias-vector"),
    ]
    cfg = modular.ModularConfig(
        assignments={b.id: ("max-of-max", 1.0) for b in blocks}
    )
    opt = modular.Modular(cfg)
    before = {b.id: b.values.copy() for b in blocks}
    eta = 0.01
    opt.step(blocks, StepContext(t=1, eta_t=eta, lambda_t=0.0))
    for b in blocks:
        expected = before[b.id] - eta * np.sign(b.grad)
        if not np.array_equal(b.values, expected):
            return _fail("modular-sign-equivalence", f"block {b.id}")
    return _ok("modular-sign-equivalence")


def check_shampoo_spectral_equivalence():
    rng = np.random.default_rng(17)
    for _ in range(5):
        g = rng.normal(size=(6, 6))
        block = ParamBlock("w", np.zeros((6, 6)), g)
        opt = curvature.Shampoo(beta2=0.0, damping=0.0, power=0.25, refresh_every=1)
        opt.step([block], StepContext(t=1, eta_t=1.0, lambda_t=0.0))
        target = -modular.dualize(g, "spectral")
        if np.linalg.norm(block.values - target) > 1e-8:
            return _fail("shampoo-spectral-equivalence",
                         f"error {np.linalg.norm(block.values - target):.2e}")
    return _ok("shampoo-spectral-equivalence")


def check_adamw_reduces_to_adam():
    rng = np.random.default_rng(18)
    w0 = rng.normal(size=8)
    a = ParamBlock("w", w0.copy(), np.zeros(8))
    b = ParamBlock("w", w0.copy(), np.zeros(8))
    plain = first_order.Adam(decay_mode="none")
    decoupled = first_order.Adam(decay_mode="decoupled")
    for t in range(1, 21):
        g = rng.normal(size=8)
        a.grad[...] = g
        b.grad[...] = g
        plain.step([a], StepContext(t=t, eta_t=0.01, lambda_t=0.0))
        decoupled.step([b], StepContext(t=t, eta_t=0.01, lambda_t=0.0))
    if not np.array_equal(a.values, b.values):
        return _fail("adamw-zero-decay-identity", "trajectories differ")
    return _ok("adamw-zero-decay-identity")


def check_prodigy_monotone():
    rng = np.random.default_rng(19)
    block = ParamBlock("w", rng.normal(size=6), np.zeros(6))
    opt = first_order.Prodigy()
    last = opt.eta_auto
    for t in range(1, 101):
        block.grad[...] = rng.normal(size=6)
        opt.step([block], StepContext(t=t, eta_t=1.0, lambda_t=0.0))
        if opt.eta_auto < last:
            return _fail("prodigy-monotone", f"step size decreased at t={t}")
        last = opt.eta_auto
    return _ok("prodigy-monotone")


def check_schedules():
    total = 200
    specs = [
        control.ScheduleSpec("warmup-stable-decay", 1.0, total=total, warmup=20,
                             stable=100, shape="cosine"),
        control.ScheduleSpec("linear-decay", 1.0, total=total),
        control.ScheduleSpec("cosine", 1.0, total=total, eta_min=0.05),
        control.ScheduleSpec("one-cycle", 1.0, total=total, peak_fraction=0.3),
        control.ScheduleSpec("constant-cooldown", 1.0, total=total, hold=150),
    ]
    for spec in specs:
        values = [control.lr_at(spec, t) for t in range(1, total + 1)]
        if min(values) < 0:
            return _fail("schedules", f"{spec.kind} went negative")
        jumps = np.abs(np.diff(values))
        if np.max(jumps) > 0.2:
            return _fail("schedules", f"{spec.kind} discontinuous")
    return _ok("schedules")


def check_scheduled_wd_ratio():
    spec = control.ScheduleSpec("cosine", 0.1, total=300, eta_min=1e-4)
    wd = control.WeightDecaySpec(lambda_base=0.05, scheduled=True)
    targets = []
    for t in range(1, 301):
        eta = control.lr_at(spec, t)
        lam = control.wd_at(wd, eta, spec.eta_max)
        targets.append(math.sqrt(2 * lam / eta))
    spread = max(targets) / min(targets) - 1.0
    if spread > 1e-12:
        return _fail("scheduled-wd-ratio", f"spread {spread:.2e}")
    return _ok("scheduled-wd-ratio", f"spread {spread:.2e}")


def check_ema_bias_correction():
    rng = np.random.default_rng(20)
    w = rng.normal(size=5)
    for beta in (0.0, 0.5, 0.99):
        mu, corrected = control.ema_update(np.zeros(5), w, beta, t=1)
        if not np.allclose(corrected, w, rtol=0, atol=1e-15):
            return _fail("ema-bias-correction", f"beta={beta}")
    return _ok("ema-bias-correction")


def check_bema_fixed_point():
    params = control.BemaParams(burn_in=3, frequency=2)
    state = control.BemaState(params)
    w_star = np.full(4, 1.7)
    for t in (3, 5, 7, 9):
        out = state.update(w_star, t)
        if not np.allclose(out, w_star, rtol=0, atol=1e-15):
            return _fail("bema-fixed-point", f"t={t}")
    return _ok("bema-fixed-point")


def check_mlp_gradients():
    rng = np.random.default_rng(21)
    model = Mlp([4, 3, 3, 2], seed=5)
    x = rng.normal(size=(6, 4))
    y = rng.integers(0, 2, size=6)
    model.forward_backward(x, y)
    analytic = model.flat_grad(x, y)
    w0 = model.flat_weights()
    h = 1e-6
    for idx in rng.choice(w0.size, size=10, replace=False):
        wp, wm = w0.copy(), w0.copy()
        wp[idx] += h
        wm[idx] -= h
        model.set_flat_weights(wp)
        lp = model.loss(x, y)
        model.set_flat_weights(wm)
        lm = model.loss(x, y)
        fd = (lp - lm) / (2 * h)
        if abs(analytic[idx] - fd) / max(1.0, abs(fd)) > 1e-5:
            model.set_flat_weights(w0)
            return _fail("mlp-gradients", f"index {idx}")
    model.set_flat_weights(w0)
    return _ok("mlp-gradients")


def check_kron_oracle():
    model = Mlp([3, 2, 2], seed=3, activation="identity")
    rng = np.random.default_rng(22)
    x = rng.normal(size=(64, 3))
    y = rng.integers(0, 2, size=64)
    _, _, cache = model.forward_backward(x, y)
    lam = 1e-2
    for b in model.blocks:
        lc = cache[b.id]
        a_cov = lc.a_bar.T @ lc.a_bar / 64
        s_cov = lc.delta.T @ lc.delta / 64
        a_d = a_cov + lam * np.eye(a_cov.shape[0])
        s_d = s_cov + lam * np.eye(s_cov.shape[0])
        lhs = (np.linalg.inv(s_d) @ b.grad @ np.linalg.inv(a_d)).flatten("F")
        rhs = np.linalg.solve(np.kron(a_d, s_d), b.grad.flatten("F"))
        if np.linalg.norm(lhs - rhs) > 1e-10:
            return _fail("kronecker-oracle", f"block {b.id}")
    return _ok("kronecker-oracle")


def check_sophia_clip_bound():
    rng = np.random.default_rng(23)
    block = ParamBlock("w", rng.normal(size=16), np.zeros(16))
    opt = curvature.Sophia(clip=0.7, refresh_every=2)
    eta = 0.05
    prev = block.values.copy()
    for t in range(1, 21):
        block.grad[...] = rng.normal(size=16) * 10
        est = {"w": np.abs(rng.normal(size=16))} if opt.needs_hessian(t) else None
        opt.step([block], StepContext(t=t, eta_t=eta, lambda_t=0.0),
                 hessian_estimate=est)
        if np.max(np.abs(block.values - prev)) > eta * 0.7 + 1e-12:
            return _fail("sophia-clip-bound", f"t={t}")
        prev = block.values.copy()
    return _ok("sophia-clip-bound")


def rotational_equilibrium_ratio(lam=0.1, eta=0.05, dim=32, steps=2000,
                                 tail=200, seed=123):
    """Plain-SGD simulation with gradients kept orthogonal to the weights
    and renormalized to constant length; returns the averaged tail ratio
    ||G|| / ||w|| and its predicted steady state sqrt(2 lam / eta)."""
    rng = np.random.default_rng(seed)
    w = rng.normal(size=dim)
    w /= np.linalg.norm(w)
    ratios = []
    for t in range(steps):
        g = rng.normal(size=dim)
        g -= (g @ w) / (w @ w) * w
        g /= np.linalg.norm(g)
        ratios.append(1.0 / np.linalg.norm(w))
        w = (1.0 - eta * lam) * w - eta * g
    return float(np.mean(ratios[-tail:])), math.sqrt(2 * lam / eta)


def check_rotational_equilibrium():
    measured, target = rotational_equilibrium_ratio()
    if abs(measured - target) > 0.05 * target:
        return _fail("rotational-equilibrium",
                     f"measured {measured:.4f}, target {target:.4f}")
    return _ok("rotational-equilibrium",
               f"measured {measured:.4f}, target {target:.4f}")


def check_reduction_table():
    rng = np.random.default_rng(24)
    # adagrad first step moves each coordinate by exactly eta (sign descent)
    g = rng.normal(size=6)
    block = ParamBlock("w", np.zeros(6), g.copy())
    first_order.AdaGrad(eps=0.0).step([block], StepContext(t=1, eta_t=1.0))
    if not np.allclose(np.abs(block.values), 1.0, atol=1e-12):
        return _fail("reduction-table", "adagrad first-step sign property")
    # adam at t=1 is sign descent up to eps
    block = ParamBlock("w", np.zeros(6), g.copy())
    first_order.Adam(eps=1e-12).step([block], StepContext(t=1, eta_t=1.0))
    if not np.allclose(np.abs(block.values), 1.0, atol=1e-6):
        return _fail("reduction-table", "adam first-step sign property")
    # shampoo with a semi-orthogonal gradient is plain gradient descent
    q = linalg.qr_orthonormal(rng.normal(size=(5, 5)))
    block = ParamBlock("w", np.zeros((5, 5)), q.copy())
    curvature.Shampoo(beta2=0.0, damping=0.0, refresh_every=1).step(
        [block], StepContext(t=1, eta_t=1.0))
    if np.linalg.norm(block.values + q) > 1e-8:
        return _fail("reduction-table", "shampoo identity-gram reduction")
    # grad_stats equilibrium target formula
    stats = grad_stats([block], StepContext(t=2, eta_t=0.05, lambda_t=0.1))
    if abs(stats.equilibrium_target - 2.0) > 1e-12:
        return _fail("reduction-table", "equilibrium target formula")
    return _ok("reduction-table")


ALL_CHECKS = (
    check_factorization_residuals,
    check_psd_power_group_law,
    check_newton_schulz,
    check_duality_holder,
    check_dualize_unit_norm,
    check_modular_sign_equivalence,
    check_shampoo_spectral_equivalence,
    check_adamw_reduces_to_adam,
    check_prodigy_monotone,
    check_schedules,
    check_scheduled_wd_ratio,
    check_ema_bias_correction,
    check_bema_fixed_point,
    check_mlp_gradients,
    check_kron_oracle,
    check_sophia_clip_bound,
    check_rotational_equilibrium,
    check_reduction_table,
)


def run_check() -> list:
    results = []
    for fn in ALL_CHECKS:
        try:
            results.append(fn())
        except Exception as exc:  # a crash is a named failure, not an abort
            name = fn.__name__.removeprefix("check_").replace("_", "-")
            results.append(_fail(name, f"raised {type(exc).__name__}: {exc}"))
    return results
