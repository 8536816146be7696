"""Plain-text run configuration: one `dotted.key = value` per line.

Lines are UTF-8, `#` starts a comment, blank lines are skipped. Every key
must be known (exact match or a registered wildcard prefix); unknown keys
are configuration errors, not warnings. Values are typed by their accessor,
and every access is recorded so a run can echo its fully resolved
configuration.
"""
from __future__ import annotations

import pathlib

from .errors import ConfigError

# Exact keys with a short description (kept flat for validation and docs).
KNOWN_KEYS = {
    "experiment": "experiment kind: train|rosenbrock|spike-grid|bias-variance|sweep",
    "seed": "master RNG seed (mandatory for every run)",
    "out_dir": "output directory for CSVs, weights, and the config echo",
    "optimizer.name": "update rule registry name",
    "schedule.kind": "learning-rate schedule kind tag",
    "schedule.eta_max": "peak learning rate",
    "schedule.eta_min": "cosine floor",
    "schedule.total": "schedule horizon T (defaults to the run's step count)",
    "schedule.warmup": "warmup steps T_w",
    "schedule.stable": "end of stable phase T_s",
    "schedule.shape": "cooldown shape: linear|cosine|sqrt",
    "schedule.period": "step-schedule period",
    "schedule.factor": "step-schedule multiplier",
    "schedule.rate": "exponential-schedule ratio per step",
    "schedule.peak_fraction": "one-cycle peak position",
    "schedule.hold": "constant-cooldown hold steps T_c",
    "wd.lambda_base": "base weight-decay coefficient",
    "wd.scheduled": "scale lambda_t with eta_t/eta_0",
    "spike.period": "LR spike period (match the preconditioner refresh)",
    "spike.factor": "LR spike multiplier",
    "spike.duration": "LR spike width in steps",
    "averaging.kind": "weight averaging: none|ema|bema",
    "averaging.beta": "EMA decay for weight averaging",
    "averaging.bias_correct": "divide the weight EMA by 1-beta^t",
    "averaging.bias_power": "BEMA bias-correction power",
    "averaging.ema_power": "BEMA EMA power",
    "averaging.lag": "BEMA lag",
    "averaging.multiplier": "BEMA multiplier",
    "averaging.burn_in": "BEMA burn-in step",
    "averaging.frequency": "BEMA update frequency",
    "model.hidden": "comma list of hidden widths",
    "model.init_seed": "weight initialization seed (defaults to seed)",
    "data.source": "auto|cifar10|synthetic",
    "data.dir": "directory holding CIFAR-10 binary batches",
    "data.projection_dim": "random-projection target dimension",
    "data.seed": "projection / synthetic generator seed",
    "data.center": "center features by the training-split mean",
    "data.synthetic_n": "synthetic training rows",
    "data.synthetic_test_n": "synthetic test rows",
    "data.synthetic_dim": "synthetic feature dimension",
    "data.classes": "number of classes",
    "data.condition": "synthetic covariance condition number",
    "train.epochs": "training epochs",
    "train.batch_size": "mini-batch size",
    "rosenbrock.steps": "steps per trajectory",
    "rosenbrock.optimizers": "comma list of update rules",
    "rosenbrock.starts": "comma list of x:y starting points",
    "spike_grid.factors": "comma list of spike factors",
    "spike_grid.periods": "comma list of refresh periods",
    "spike_grid.base_lrs": "comma list of base learning rates",
    "spike_grid.epochs": "epochs per grid cell",
    "bias_variance.shapes": "comma list of cooldown shapes",
    "bias_variance.permutations": "number of data orderings R",
    "bias_variance.pre_steps": "steps before the shared checkpoint",
    "bias_variance.cooldown_steps": "cooldown length",
    "bias_variance.reference_extra": "extra steps for the reference model",
    "sweep.optimizers": "comma list of update rules",
    "sweep.lrs": "comma list of peak learning rates",
    "sweep.wds": "comma list of weight-decay coefficients",
    "sweep.epochs": "epochs per sweep cell",
}

# Prefixes whose remainder is validated downstream (per-rule hyperparameters,
# per-optimizer Rosenbrock learning rates).
WILDCARD_PREFIXES = ("optimizer.", "rosenbrock.lr.")


def parse_config_text(text: str) -> dict:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key not in KNOWN_KEYS and not any(
            key.startswith(p) and len(key) > len(p) for p in WILDCARD_PREFIXES
        ):
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        entries[key] = value
    return entries


def _to_bool(raw: str, key: str) -> bool:
    low = raw.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


_REQUIRED = object()


class RunConfig:
    """Typed access over parsed entries; records everything it resolves."""

    def __init__(self, entries: dict, path: str = "<memory>"):
        self.entries = entries
        self.path = path
        self.resolved: dict[str, str] = {}

    @classmethod
    def from_path(cls, path) -> "RunConfig":
        p = pathlib.Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        return cls(parse_config_text(p.read_text(encoding="utf-8")), str(p))

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return cls(parse_config_text(text))

    def _record(self, key: str, value):
        if isinstance(value, bool):
            self.resolved[key] = "true" if value else "false"
        elif isinstance(value, (list, tuple)):
            self.resolved[key] = ",".join(str(v) for v in value)
        else:
            self.resolved[key] = str(value)
        return value

    def has(self, key: str) -> bool:
        return key in self.entries

    def get_str(self, key: str, default=_REQUIRED):
        if key not in self.entries:
            if default is _REQUIRED:
                raise ConfigError(f"missing required key {key!r}")
            if default is None:
                return None
            return self._record(key, default)
        return self._record(key, self.entries[key])

    def get_int(self, key: str, default=_REQUIRED) -> int:
        raw = self.entries.get(key)
        if raw is None:
            if default is _REQUIRED:
                raise ConfigError(f"missing required key {key!r}")
            return self._record(key, int(default))
        try:
            return self._record(key, int(raw))
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}")

    def get_float(self, key: str, default=_REQUIRED) -> float:
        raw = self.entries.get(key)
        if raw is None:
            if default is _REQUIRED:
                raise ConfigError(f"missing required key {key!r}")
            return self._record(key, float(default))
        try:
            return self._record(key, float(raw))
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw!r}")

    def get_bool(self, key: str, default: bool = False) -> bool:
        raw = self.entries.get(key)
        if raw is None:
            return self._record(key, default)
        return self._record(key, _to_bool(raw, key))

    def get_list(self, key: str, default=_REQUIRED, cast=str) -> list:
        raw = self.entries.get(key)
        if raw is None:
            if default is _REQUIRED:
                raise ConfigError(f"missing required key {key!r}")
            return self._record(key, list(default))
        try:
            items = [cast(part.strip()) for part in raw.split(",") if part.strip()]
        except ValueError:
            raise ConfigError(f"{key}: bad list element in {raw!r}")
        if not items:
            raise ConfigError(f"{key}: empty list")
        return self._record(key, items)

    def group(self, prefix: str) -> dict:
        """Raw entries under a wildcard prefix, with the prefix stripped."""
        out = {}
        for key, raw in self.entries.items():
            if key.startswith(prefix) and len(key) > len(prefix):
                out[key[len(prefix):]] = raw
                self.resolved[key] = raw
        return out

    def echo_lines(self) -> list:
        return [f"{k} = {self.resolved[k]}" for k in sorted(self.resolved)]


def parse_auto(raw: str):
    """int, then float, then bool, then string; for wildcard hyperparameters."""
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    return raw
