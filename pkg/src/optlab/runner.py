"""Experiment harness: training loops, Rosenbrock trajectories, spike grids,
the cooldown bias-variance decomposition, sweeps, and the invariant suite.

Every run is deterministic under its seeds; metrics CSVs are byte-stable
except for the wall-clock column. Outputs land in the configured out_dir
together with a config echo file listing every resolved setting.
"""
from __future__ import annotations

import copy
import csv
import pathlib
import time
from dataclasses import dataclass, field

import numpy as np

from . import curvature, first_order, modular
from .config import RunConfig, parse_auto
from .control import (
    BemaParams,
    BemaWeights,
    EmaWeights,
    ScheduleSpec,
    SpikeSpec,
    WeightDecaySpec,
    lr_at,
    spike_lr,
    wd_at,
)
from .core import StepContext, grad_stats
from .data import (
    Dataset,
    batch_iter,
    cifar10_present,
    jl_project,
    load_cifar10,
    synthetic_anisotropic,
)
from .errors import ConfigError, DivergenceError
from .problems import Mlp

METRICS_COLUMNS = (
    "step", "epoch", "lr", "wd", "train_loss", "global_grad_norm",
    "global_weight_norm", "max_block_ratio", "test_accuracy", "wall_ms",
)

OPTIMIZERS = {
    "sgd": first_order.Sgd,
    "heavy-ball": lambda **kw: first_order.Sgd(variant="heavy-ball", **kw),
    "nesterov": lambda **kw: first_order.Sgd(variant="nesterov", **kw),
    "dual-averaging": first_order.DualAveraging,
    "adagrad": first_order.AdaGrad,
    "rmsprop": first_order.RmsProp,
    "adam": first_order.Adam,
    "adamw": first_order.AdamW,
    "signsgd": first_order.SignSgd,
    "prodigy": first_order.Prodigy,
    "kfac": curvature.Kfac,
    "ekfac": curvature.Ekfac,
    "shampoo": curvature.Shampoo,
    "soap": curvature.Soap,
    "splus": curvature.Splus,
    "muon": curvature.Muon,
    "sophia": curvature.Sophia,
    "modular": modular.Modular,
}

# Extra optimizer.* switches consumed by the harness, not the rule itself.
_HARNESS_PARAMS = ("name", "fisher")


def build_optimizer(name: str, params: dict | None = None):
    if name not in OPTIMIZERS:
        raise ConfigError(
            f"unknown optimizer {name!r}; known: {', '.join(sorted(OPTIMIZERS))}"
        )
    kwargs = {k: parse_auto(v) if isinstance(v, str) else v
              for k, v in (params or {}).items() if k not in _HARNESS_PARAMS}
    fallback_name = kwargs.pop("fallback", None)
    if fallback_name is not None:
        kwargs["fallback"] = build_optimizer(str(fallback_name))
    try:
        return OPTIMIZERS[name](**kwargs)
    except TypeError as exc:
        raise ConfigError(f"optimizer {name!r}: {exc}")


@dataclass
class TaskData:
    train: Dataset
    test: Dataset
    source: str


def resolve_dataset(cfg: RunConfig) -> TaskData:
    """CIFAR-10 (projected) when its binaries are present, else the
    synthetic anisotropic substitute so runs stay reproducible offline.

    The substitute only covers ABSENT data: a present-but-broken set of
    batch files is an ingestion error, never a silent fallback.
    """
    source = cfg.get_str("data.source", "auto")
    data_dir = cfg.get_str("data.dir", "data")
    if source not in ("auto", "cifar10", "synthetic"):
        raise ConfigError(f"data.source must be auto|cifar10|synthetic, got {source!r}")
    if source == "cifar10" or (source == "auto" and cifar10_present(data_dir)):
        train, test = load_cifar10(data_dir)
        return _project_and_center(cfg, train, test, "cifar10")
    n = cfg.get_int("data.synthetic_n", 20000)
    n_test = cfg.get_int("data.synthetic_test_n", 4000)
    dim = cfg.get_int("data.synthetic_dim", 256)
    classes = cfg.get_int("data.classes", 10)
    condition = cfg.get_float("data.condition", 100.0)
    seed = cfg.get_int("data.seed", cfg.get_int("seed"))
    full = synthetic_anisotropic(n + n_test, dim, classes, condition, seed)
    train = Dataset(full.features[:n], full.labels[:n], "train")
    test = Dataset(full.features[n:], full.labels[n:], "test")
    return _center(cfg, train, test, "synthetic")


def _project_and_center(cfg, train, test, source):
    d_target = cfg.get_int("data.projection_dim", 256)
    seed = cfg.get_int("data.seed", cfg.get_int("seed"))
    projected, q = jl_project(train.features, d_target, seed)
    train = Dataset(projected, train.labels, "train")
    test = Dataset(test.features @ q, test.labels, "test")
    return _center(cfg, train, test, source)


def _center(cfg, train, test, source):
    if cfg.get_bool("data.center", True):
        mean = train.features.mean(axis=0)
        train = Dataset(train.features - mean, train.labels, "train")
        test = Dataset(test.features - mean, test.labels, "test")
    return TaskData(train, test, source)


def build_model(cfg: RunConfig, data: TaskData) -> Mlp:
    hidden = cfg.get_list("model.hidden", default=[256, 256], cast=int)
    classes = int(data.train.labels.max()) + 1
    dims = [data.train.dim] + hidden + [classes]
    init_seed = cfg.get_int("model.init_seed", cfg.get_int("seed"))
    return Mlp(dims, seed=init_seed)


def build_schedule(cfg: RunConfig, total_steps: int) -> ScheduleSpec:
    kind = cfg.get_str("schedule.kind", "constant")
    if cfg.has("schedule.total"):
        total = cfg.get_int("schedule.total")
    else:
        total = total_steps if total_steps > 0 else None
    return ScheduleSpec(
        kind=kind,
        eta_max=cfg.get_float("schedule.eta_max", 1e-3),
        total=total,
        warmup=cfg.get_int("schedule.warmup", 0),
        stable=cfg.get_int("schedule.stable", 0) or None,
        shape=cfg.get_str("schedule.shape", "linear"),
        eta_min=cfg.get_float("schedule.eta_min", 0.0),
        period=cfg.get_int("schedule.period", 0) or None,
        factor=cfg.get_float("schedule.factor", 0.1),
        rate=cfg.get_float("schedule.rate", 0.99),
        peak_fraction=cfg.get_float("schedule.peak_fraction", 0.3),
        hold=cfg.get_int("schedule.hold", 0) if cfg.has("schedule.hold") else None,
    )


def build_spike(cfg: RunConfig) -> SpikeSpec | None:
    if not cfg.has("spike.period"):
        return None
    return SpikeSpec(
        period=cfg.get_int("spike.period"),
        factor=cfg.get_float("spike.factor", 1.0),
        duration=cfg.get_int("spike.duration", 1),
    )


def build_averager(cfg: RunConfig):
    kind = cfg.get_str("averaging.kind", "none")
    if kind == "none":
        return None
    if kind == "ema":
        return EmaWeights(
            beta=cfg.get_float("averaging.beta", 0.99),
            bias_correct=cfg.get_bool("averaging.bias_correct", True),
        )
    if kind == "bema":
        return BemaWeights(BemaParams(
            bias_power=cfg.get_float("averaging.bias_power", 0.5),
            ema_power=cfg.get_float("averaging.ema_power", 0.5),
            lag=cfg.get_float("averaging.lag", 1.0),
            multiplier=cfg.get_float("averaging.multiplier", 1.0),
            burn_in=cfg.get_int("averaging.burn_in", 0),
            frequency=cfg.get_int("averaging.frequency", 1),
        ))
    raise ConfigError(f"averaging.kind must be none|ema|bema, got {kind!r}")


def _fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


class MetricsWriter:
    def __init__(self, path: pathlib.Path):
        self.path = path
        self.rows: list[dict] = []
        self._fh = open(path, "w", newline="", encoding="utf-8")
        self._csv = csv.writer(self._fh)
        self._csv.writerow(METRICS_COLUMNS)
        self._fh.flush()

    def write(self, **fields):
        self.rows.append(fields)
        self._csv.writerow([_fmt(fields.get(c, "")) for c in METRICS_COLUMNS])

    def close(self):
        self._fh.flush()
        self._fh.close()


@dataclass
class TrainResult:
    csv_path: pathlib.Path
    model: Mlp
    optimizer: object
    rows: list = field(default_factory=list)
    eval_weights: dict = field(default_factory=dict)
    test_accuracy_by_epoch: list = field(default_factory=list)
    diverged: bool = False


def _echo_config(cfg: RunConfig, out_dir: pathlib.Path):
    (out_dir / "config_echo.txt").write_text(
        "\n".join(cfg.echo_lines()) + "\n", encoding="utf-8"
    )


def _eval_weights(model: Mlp, optimizer, averager) -> dict:
    if averager is not None:
        return averager.snapshot(model.blocks)
    return {b.id: np.array(optimizer.eval_values(b), copy=True) for b in model.blocks}


def run_train(cfg: RunConfig, out_dir=None, task: TaskData | None = None) -> TrainResult:
    seed = cfg.get_int("seed")
    out_dir = pathlib.Path(out_dir or cfg.get_str("out_dir", "runs/train"))
    out_dir.mkdir(parents=True, exist_ok=True)
    data = task or resolve_dataset(cfg)
    model = build_model(cfg, data)
    epochs = cfg.get_int("train.epochs", 10)
    batch_size = cfg.get_int("train.batch_size", 128)
    steps_per_epoch = -(-data.train.n // batch_size)
    total_steps = epochs * steps_per_epoch
    # a zero-epoch run still builds its schedule; give it a 1-step horizon
    schedule = build_schedule(cfg, max(total_steps, 1))
    wd_spec = WeightDecaySpec(
        lambda_base=cfg.get_float("wd.lambda_base", 0.0),
        scheduled=cfg.get_bool("wd.scheduled", False),
    )
    spike = build_spike(cfg)
    averager = build_averager(cfg)
    opt_params = cfg.group("optimizer.")
    opt_name = opt_params.get("name") or cfg.get_str("optimizer.name", "adamw")
    optimizer = build_optimizer(opt_name, opt_params)
    fisher_mode = opt_params.get("fisher", "empirical")
    if fisher_mode not in ("empirical", "sampled"):
        raise ConfigError(f"optimizer.fisher must be empirical|sampled, got {fisher_mode!r}")
    fisher_rng = np.random.default_rng((seed, 101))
    hess_rng = np.random.default_rng((seed, 202))

    writer = MetricsWriter(out_dir / "metrics.csv")
    result = TrainResult(csv_path=writer.path, model=model, optimizer=optimizer)
    result.rows = writer.rows
    started = time.perf_counter()
    t = 0
    last_eta, last_lam = schedule.eta_max, wd_spec.lambda_base
    try:
        for epoch in range(1, epochs + 1):
            epoch_losses = []
            for xb, yb in batch_iter(data.train, batch_size, epoch, seed):
                t += 1
                eta = spike_lr(lr_at(schedule, t), spike, t)
                lam = wd_at(wd_spec, eta, schedule.eta_max)
                last_eta, last_lam = eta, lam
                kwargs = {}
                if isinstance(optimizer, curvature.Sophia) and optimizer.needs_hessian(t):
                    kwargs["hessian_estimate"] = _sophia_estimate(
                        optimizer, model, xb, yb, hess_rng
                    )
                loss, _, cache = model.forward_backward(xb, yb)
                if fisher_mode == "sampled" and optimizer.needs_cache:
                    cache = model.sampled_label_cache(xb, fisher_rng)
                ctx = StepContext(t=t, eta_t=eta, lambda_t=lam, epoch=epoch, rng_seed=seed)
                stats = grad_stats(model.blocks, ctx)
                optimizer.step(model.blocks, ctx, cache, **kwargs)
                if averager is not None:
                    averager.update(model.blocks, t)
                epoch_losses.append(loss)
                ratios = [r for r in stats.per_block_ratio.values() if r is not None]
                writer.write(
                    step=t, epoch=epoch, lr=eta, wd=lam, train_loss=loss,
                    global_grad_norm=stats.global_grad_norm,
                    global_weight_norm=float(np.sqrt(sum(
                        v**2 for v in stats.per_block_weight_norm.values()))),
                    max_block_ratio=max(ratios) if ratios else "",
                    test_accuracy="",
                    wall_ms=(time.perf_counter() - started) * 1e3,
                )
            weights = _eval_weights(model, optimizer, averager)
            acc = model.accuracy(data.test.features, data.test.labels, weights)
            result.test_accuracy_by_epoch.append(acc)
            writer.write(
                step=t, epoch=epoch, lr=last_eta, wd=last_lam,
                train_loss=float(np.mean(epoch_losses)) if epoch_losses else "",
                global_grad_norm="", global_weight_norm="", max_block_ratio="",
                test_accuracy=acc, wall_ms=(time.perf_counter() - started) * 1e3,
            )
    except DivergenceError:
        result.diverged = True
        raise
    finally:
        writer.close()
        _echo_config(cfg, out_dir)
    result.eval_weights = _eval_weights(model, optimizer, averager)
    np.savez(out_dir / "weights_final.npz", **{b.id: b.values for b in model.blocks})
    np.savez(out_dir / "weights_eval.npz", **result.eval_weights)
    return result


def _sophia_estimate(optimizer, model, xb, yb, rng):
    """Diagonal Hessian estimate for the current batch; the model's weights
    and gradient buffers are restored afterwards."""
    if optimizer.estimator == "gnb":
        return curvature.gnb_diag_estimate(model, xb, rng)
    w0 = model.flat_weights()
    g0 = [b.grad.copy() for b in model.blocks]

    def grad_oracle(w):
        model.set_flat_weights(w)
        return model.flat_grad(xb, yb)

    try:
        flat = curvature.hutchinson_diag_estimate(grad_oracle, w0, samples=1,
                                                  eps_fd=1e-4, rng=rng)
    finally:
        model.set_flat_weights(w0)
        for b, g in zip(model.blocks, g0):
            b.grad[...] = g
    return model.unflatten(flat)


ROSENBROCK_DEFAULT_LRS = {
    "sgd": 1e-3, "adamw": 0.1, "adam": 0.1, "shampoo": 0.1, "prodigy": 1.0,
    "muon": 0.05, "signsgd": 0.01, "rmsprop": 0.05, "adagrad": 0.5,
    "heavy-ball": 1e-3, "nesterov": 1e-3, "soap": 0.1, "splus": 0.1,
    "sophia": 0.1, "dual-averaging": 0.05, "kfac": 0.1, "ekfac": 0.1,
    "modular": 0.05,
}


@dataclass
class Trajectory:
    optimizer: str
    start: tuple
    rows: list  # (step, x, y, f)
    diverged: bool
    prodigy_eta: list  # per-step automatic step size when the rule is prodigy
    csv_path: pathlib.Path | None = None


def run_rosenbrock(cfg: RunConfig, out_dir=None) -> list:
    out_dir = pathlib.Path(out_dir or cfg.get_str("out_dir", "runs/rosenbrock"))
    out_dir.mkdir(parents=True, exist_ok=True)
    steps = cfg.get_int("rosenbrock.steps", 500)
    names = cfg.get_list("rosenbrock.optimizers",
                         default=["sgd", "adamw", "shampoo", "prodigy"])
    if not names:
        raise ConfigError("rosenbrock.optimizers must be nonempty")
    starts = [
        tuple(float(p) for p in item.split(":"))
        for item in cfg.get_list(
            "rosenbrock.starts",
            default=["1.5:2.5", "-1.5:2.5", "-1.0:-1.0", "1.0:-1.0"],
        )
    ]
    lr_overrides = {k: float(v) for k, v in cfg.group("rosenbrock.lr.").items()}
    results = []
    from .core import ParamBlock
    from .problems import rosenbrock_eval

    for name in names:
        lr = lr_overrides.get(name, ROSENBROCK_DEFAULT_LRS.get(name, 1e-2))
        for idx, (x0, y0) in enumerate(starts):
            opt = build_optimizer(name, cfg.group("optimizer."))
            block = ParamBlock("xy", np.array([[x0, y0]]), np.zeros((1, 2)))
            rows = [(0, x0, y0, rosenbrock_eval(x0, y0)[0])]
            etas = []
            diverged = False
            for t in range(1, steps + 1):
                x, y = float(block.values[0, 0]), float(block.values[0, 1])
                f, (gx, gy) = rosenbrock_eval(x, y)
                if not np.isfinite(f) or not np.isfinite(gx) or not np.isfinite(gy):
                    diverged = True
                    break
                block.grad[...] = [[gx, gy]]
                try:
                    opt.step([block], StepContext(t=t, eta_t=lr, lambda_t=0.0))
                except DivergenceError:
                    diverged = True
                    break
                if isinstance(opt, first_order.Prodigy):
                    etas.append(opt.eta_auto)
                nx, ny = float(block.values[0, 0]), float(block.values[0, 1])
                rows.append((t, nx, ny, rosenbrock_eval(nx, ny)[0]))
            traj = Trajectory(name, (x0, y0), rows, diverged, etas)
            traj.csv_path = out_dir / f"rosenbrock__{name}__start{idx}.csv"
            with open(traj.csv_path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(["step", "x", "y", "f"])
                for row in rows:
                    w.writerow([row[0], _fmt(row[1]), _fmt(row[2]), _fmt(row[3])])
            results.append(traj)
    _echo_config(cfg, out_dir)
    return results


def run_spike_grid(cfg: RunConfig, out_dir=None) -> list:
    out_dir = pathlib.Path(out_dir or cfg.get_str("out_dir", "runs/spike_grid"))
    out_dir.mkdir(parents=True, exist_ok=True)
    opt_params = cfg.group("optimizer.")
    name = opt_params.get("name") or cfg.get_str("optimizer.name", "splus")
    if name not in ("soap", "splus"):
        raise ConfigError("spike-grid supports optimizer.name soap or splus")
    factors = cfg.get_list("spike_grid.factors", default=[1.0, 2.0, 10.0], cast=float)
    periods = cfg.get_list("spike_grid.periods", default=[20, 50, 100], cast=int)
    base_lrs = cfg.get_list("spike_grid.base_lrs", default=[1e-4, 1e-3], cast=float)
    epochs = cfg.get_int("spike_grid.epochs", 3)
    seed = cfg.get_int("seed")
    data = resolve_dataset(cfg)
    rows = []
    for base_lr in base_lrs:
        for period in periods:
            for factor in factors:
                sub_lines = [
                    "experiment = train",
                    f"seed = {seed}",
                    f"optimizer.name = {name}",
                    f"optimizer.refresh_every = {period}",
                    "schedule.kind = constant",
                    f"schedule.eta_max = {base_lr}",
                    f"train.epochs = {epochs}",
                    f"train.batch_size = {cfg.get_int('train.batch_size', 128)}",
                ]
                if factor > 1.0:
                    sub_lines += [
                        f"spike.period = {period}",
                        f"spike.factor = {factor}",
                        "spike.duration = 1",
                    ]
                sub = RunConfig.from_text("\n".join(sub_lines))
                cell_dir = out_dir / f"cell_lr{base_lr}_p{period}_f{factor}"
                res = run_train(sub, out_dir=cell_dir, task=data)
                rows.append({
                    "factor": factor, "period": period, "base_lr": base_lr,
                    "seed": seed,
                    "final_test_accuracy": res.test_accuracy_by_epoch[-1],
                })
    grid_path = out_dir / "spike_grid.csv"
    with open(grid_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["factor", "period", "base_lr", "seed", "final_test_accuracy"])
        for r in rows:
            w.writerow([_fmt(r["factor"]), r["period"], _fmt(r["base_lr"]),
                        r["seed"], _fmt(r["final_test_accuracy"])])
    _echo_config(cfg, out_dir)
    return rows


@dataclass
class BiasVariance:
    shape: str
    bias: float
    variance: float
    runs: int
    member_losses: list
    mean_model_loss: float
    reference_loss: float
    member_weights: list = field(default_factory=list)
    mean_weights: dict = field(default_factory=dict)
    reference_weights: dict = field(default_factory=dict)


def run_bias_variance(cfg: RunConfig, out_dir=None, member_tags=None) -> list:
    out_dir = pathlib.Path(out_dir or cfg.get_str("out_dir", "runs/bias_variance"))
    out_dir.mkdir(parents=True, exist_ok=True)
    r_perms = cfg.get_int("bias_variance.permutations", 4)
    if r_perms < 2:
        raise ConfigError("bias_variance.permutations must be >= 2")
    shapes = cfg.get_list("bias_variance.shapes", default=["linear", "sqrt"])
    pre_steps = cfg.get_int("bias_variance.pre_steps", 150)
    cool_steps = cfg.get_int("bias_variance.cooldown_steps", 100)
    extra = cfg.get_int("bias_variance.reference_extra", 300)
    seed = cfg.get_int("seed")
    batch_size = cfg.get_int("train.batch_size", 128)
    eta = cfg.get_float("schedule.eta_max", 1e-3)
    data = resolve_dataset(cfg)
    model = build_model(cfg, data)
    opt_params = cfg.group("optimizer.")
    opt_name = opt_params.get("name") or cfg.get_str("optimizer.name", "adamw")
    optimizer = build_optimizer(opt_name, opt_params)

    def stream(perm_tag: int):
        # one permutation lineage per tag; epochs within a lineage reshuffle
        epoch = 0
        while True:
            epoch += 1
            yield from batch_iter(data.train, batch_size,
                                  perm_tag * 1_000_000 + epoch, seed)

    def advance(mdl, opt, batches, n_steps, t0, lr_fn):
        t = t0
        for _ in range(n_steps):
            t += 1
            xb, yb = next(batches)
            _, _, cache = mdl.forward_backward(xb, yb)
            opt.step(mdl.blocks, StepContext(t=t, eta_t=lr_fn(t - t0), lambda_t=0.0),
                     cache)
        return t

    t_pre = advance(model, optimizer, stream(0), pre_steps, 0, lambda k: eta)
    checkpoint = (copy.deepcopy(model), copy.deepcopy(optimizer))

    def cooled(shape, k):
        from .control import cooldown_value

        return eta * cooldown_value(shape, k / cool_steps)

    def test_loss(mdl):
        return mdl.loss(data.test.features, data.test.labels)

    tags = list(member_tags) if member_tags is not None else list(range(1, r_perms + 1))
    if len(tags) != r_perms:
        raise ConfigError("member_tags must supply one permutation tag per run")
    results = []
    for shape in shapes:
        members = []
        losses = []
        for tag in tags:
            mdl, opt = copy.deepcopy(checkpoint)
            advance(mdl, opt, stream(tag), cool_steps, t_pre, lambda k: cooled(shape, k))
            members.append({b.id: b.values.copy() for b in mdl.blocks})
            losses.append(test_loss(mdl))
        mean_weights = {
            bid: np.mean([m[bid] for m in members], axis=0) for bid in members[0]
        }
        mdl_ref, opt_ref = copy.deepcopy(checkpoint)
        t_ref = advance(mdl_ref, opt_ref, stream(0), extra, t_pre, lambda k: eta)
        advance(mdl_ref, opt_ref, stream(0), cool_steps, t_ref,
                lambda k: cooled(shape, k))
        base_model = checkpoint[0]
        mean_loss = base_model.loss(data.test.features, data.test.labels, mean_weights)
        ref_loss = test_loss(mdl_ref)
        bias = mean_loss - ref_loss
        variance = float(np.mean(losses)) - mean_loss
        results.append(BiasVariance(
            shape, bias, variance, r_perms, losses, mean_loss, ref_loss,
            member_weights=members, mean_weights=mean_weights,
            reference_weights={b.id: b.values.copy() for b in mdl_ref.blocks},
        ))
    path = out_dir / "bias_variance.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["shape", "bias", "variance", "runs"])
        for r in results:
            w.writerow([r.shape, _fmt(r.bias), _fmt(r.variance), r.runs])
    _echo_config(cfg, out_dir)
    return results


def run_sweep(cfg: RunConfig, out_dir=None):
    out_dir = pathlib.Path(out_dir or cfg.get_str("out_dir", "runs/sweep"))
    out_dir.mkdir(parents=True, exist_ok=True)
    names = cfg.get_list("sweep.optimizers", default=["adamw", "soap", "muon"])
    lrs = cfg.get_list("sweep.lrs", default=[1e-3, 3e-3, 1e-2], cast=float)
    wds = cfg.get_list("sweep.wds", default=[0.0], cast=float)
    epochs = cfg.get_int("sweep.epochs", 3)
    seed = cfg.get_int("seed")
    data = resolve_dataset(cfg)
    rows = []
    for name in names:
        for lr in lrs:
            for wd in wds:
                sub = RunConfig.from_text("\n".join([
                    "experiment = train",
                    f"seed = {seed}",
                    f"optimizer.name = {name}",
                    "schedule.kind = cosine",
                    f"schedule.eta_max = {lr}",
                    f"wd.lambda_base = {wd}",
                    f"train.epochs = {epochs}",
                    f"train.batch_size = {cfg.get_int('train.batch_size', 128)}",
                ]))
                cell = out_dir / f"cell_{name}_lr{lr}_wd{wd}"
                try:
                    res = run_train(sub, out_dir=cell, task=data)
                except DivergenceError:
                    rows.append({"optimizer": name, "lr": lr, "wd": wd,
                                 "final_test_loss": float("inf"),
                                 "final_test_accuracy": 0.0, "diverged": True})
                    continue
                loss = res.model.loss(data.test.features, data.test.labels,
                                      res.eval_weights)
                rows.append({"optimizer": name, "lr": lr, "wd": wd,
                             "final_test_loss": loss,
                             "final_test_accuracy": res.test_accuracy_by_epoch[-1],
                             "diverged": False})
    winner = min(rows, key=lambda r: r["final_test_loss"])
    path = out_dir / "sweep.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["optimizer", "lr", "wd", "final_test_loss",
                    "final_test_accuracy", "diverged"])
        for r in rows:
            w.writerow([r["optimizer"], _fmt(r["lr"]), _fmt(r["wd"]),
                        _fmt(r["final_test_loss"]), _fmt(r["final_test_accuracy"]),
                        str(r["diverged"]).lower()])
    _echo_config(cfg, out_dir)
    return rows, winner
