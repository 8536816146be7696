"""Command-line entry points.

    optlab train <config>
    optlab rosenbrock <config>
    optlab spike-grid <config>
    optlab bias-variance <config>
    optlab sweep <config>
    optlab project <in-dir> <out-file> --dim 256 --seed S
    optlab check

Exit codes: 0 success, 2 configuration error, 3 ingestion error,
4 divergence, 5 invariant failure.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import checks, runner
from .config import RunConfig
from .data import jl_project, load_cifar10
from .errors import (
    ConfigError,
    DivergenceError,
    IngestionError,
    ScheduleExhaustedError,
)

EXIT_CONFIG = 2
EXIT_INGESTION = 3
EXIT_DIVERGENCE = 4
EXIT_INVARIANT = 5


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="optlab",
                                     description="optimizer laboratory harness")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("train", "rosenbrock", "spike-grid", "bias-variance", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("config", help="path to a dotted-key config file")
        p.add_argument("--out", default=None, help="override the output directory")
    p = sub.add_parser("project", help="project CIFAR-10 features and save npz")
    p.add_argument("in_dir")
    p.add_argument("out_file")
    p.add_argument("--dim", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    sub.add_parser("check", help="run the full invariant suite")
    return parser


def _cmd_train(args) -> int:
    cfg = RunConfig.from_path(args.config)
    result = runner.run_train(cfg, out_dir=args.out)
    final = result.test_accuracy_by_epoch[-1] if result.test_accuracy_by_epoch else None
    print(f"train: wrote {result.csv_path}")
    if final is not None:
        print(f"train: final test accuracy {final:.4f}")
    return 0


def _cmd_rosenbrock(args) -> int:
    cfg = RunConfig.from_path(args.config)
    trajectories = runner.run_rosenbrock(cfg, out_dir=args.out)
    for traj in trajectories:
        tail = traj.rows[-1]
        status = "diverged" if traj.diverged else f"f={tail[3]:.6g}"
        print(f"rosenbrock: {traj.optimizer} from {traj.start} -> {status} "
              f"({traj.csv_path})")
    return 0


def _cmd_spike_grid(args) -> int:
    cfg = RunConfig.from_path(args.config)
    rows = runner.run_spike_grid(cfg, out_dir=args.out)
    print(f"spike-grid: {len(rows)} cells")
    return 0


def _cmd_bias_variance(args) -> int:
    cfg = RunConfig.from_path(args.config)
    for r in runner.run_bias_variance(cfg, out_dir=args.out):
        print(f"bias-variance: {r.shape}: bias={r.bias:.6g} "
              f"variance={r.variance:.6g} (R={r.runs})")
    return 0


def _cmd_sweep(args) -> int:
    cfg = RunConfig.from_path(args.config)
    rows, winner = runner.run_sweep(cfg, out_dir=args.out)
    print(f"sweep: {len(rows)} cells; winner {winner['optimizer']} "
          f"lr={winner['lr']} wd={winner['wd']} "
          f"test_loss={winner['final_test_loss']:.6g}")
    return 0


def _cmd_project(args) -> int:
    train, test = load_cifar10(args.in_dir)
    projected, q = jl_project(train.features, args.dim, args.seed)
    np.savez(
        args.out_file,
        train_features=projected,
        train_labels=train.labels,
        test_features=test.features @ q,
        test_labels=test.labels,
        projection=q,
    )
    print(f"project: wrote {args.out_file} "
          f"({train.n} train rows, {test.n} test rows, dim {args.dim})")
    return 0


def _cmd_check(_args) -> int:
    results = checks.run_check()
    failures = [r for r in results if not r.passed]
    for r in results:
        status = "ok" if r.passed else "FAIL"
        detail = f" ({r.detail})" if r.detail else ""
        print(f"check: {r.name}: {status}{detail}")
    if failures:
        print(f"check: {len(failures)} failed: "
              + ", ".join(r.name for r in failures))
        return EXIT_INVARIANT
    print(f"check: all {len(results)} checks passed")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "rosenbrock": _cmd_rosenbrock,
    "spike-grid": _cmd_spike_grid,
    "bias-variance": _cmd_bias_variance,
    "sweep": _cmd_sweep,
    "project": _cmd_project,
    "check": _cmd_check,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ScheduleExhaustedError) as exc:
        # an exhausted schedule means the configured horizon disagrees with
        # the run length, which is a configuration fault
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IngestionError as exc:
        print(f"ingestion error: {exc}", file=sys.stderr)
        return EXIT_INGESTION
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
