"""Flat ``key = value`` experiment configuration.

One setting per line, ``#`` starts a comment, blank lines are ignored.
Values are typed by the schema below; unknown keys and missing required
keys are rejected with the offending key in the message.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

EXPERIMENTS = ("blr", "audio", "random_effects", "toy_gaussian")


class ConfigError(ValueError):
    """Bad configuration. ``key`` names the offending setting when known."""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class MissingKeyError(ConfigError):
    pass


# key -> (type, default). ``None`` default means "unset"; REQUIRED means mandatory.
REQUIRED = object()

SCHEMA: Dict[str, tuple] = {
    "experiment": (str, REQUIRED),
    # step-size, learning-rate and batch schedules
    "delta0": (float, REQUIRED),
    "a": (float, REQUIRED),
    "gamma0": (float, REQUIRED),
    "b": (float, 0.0),
    "m0": (float, 1.0),
    "c": (float, 0.0),
    "gamma_bar": (float, math.inf),
    # run
    "n_iterations": (int, REQUIRED),
    "chain_burnin": (int, 0),
    "theta_warmup": (int, 0),
    "seed": (int, 0),
    "replicates": (int, 1),
    "theta0": (float, None),
    "theta_lower": (float, None),
    "theta_upper": (float, None),
    "record_every": (int, 1),
    # toy_gaussian
    "y": (float, 1.0),
    "prior_var": (float, 1.0),
    "noise_var": (float, 1.0),
    # blr
    "sigma2": (float, 5.0),
    "train_frac": (float, 0.8),
    # audio
    "problem_seed": (int, 0),
    "ell": (int, 4000),
    "d_notes": (int, 20),
    "d_positions": (int, 10),
    "p": (int, 120),
    "sigma": (float, 0.015),
    "lam": (float, 4e-5),
    "sparsity": (int, 8),
    "log_theta": (bool, True),
    # random_effects
    "d_y": (int, 500),
    "p_fixed": (int, 1000),
    "d_random": (int, 5),
    "sigma_true": (float, 0.1),
    "zero_frac": (float, 0.98),
    "huber_lam": (float, 30.0),
    "support_tau": (float, 0.005),
    # thme-scan
    "scan_min": (float, None),
    "scan_max": (float, None),
    "scan_points": (int, 11),
    "scan_samples": (int, 20000),
    "scan_gamma": (float, 1e-3),
    "scan_burnin": (int, 5000),
    "scan_thin": (int, 20),
    "scan_chains": (int, 1000),
    # map-sweep
    "sweep_min": (float, 1e2),
    "sweep_max": (float, 1e7),
    "sweep_points": (int, 20),
    # paths
    "data_in": (str, None),
    "out_dir": (str, "out"),
}

# Settings that must be strictly positive when present.
POSITIVE = {
    "delta0", "gamma0", "m0", "gamma_bar", "n_iterations", "replicates", "record_every",
    "prior_var", "noise_var", "sigma2", "ell", "d_notes", "d_positions", "p", "sigma", "lam",
    "d_y", "p_fixed", "d_random", "huber_lam", "support_tau", "scan_points", "scan_samples",
    "scan_gamma", "scan_thin", "scan_chains", "sweep_min", "sweep_max", "sweep_points",
}
NON_NEGATIVE = {"a", "b", "c", "chain_burnin", "theta_warmup", "seed", "problem_seed", "sparsity",
                "sigma_true", "zero_frac", "scan_burnin"}


def _convert(key: str, raw: str):
    kind = SCHEMA[key][0]
    try:
        if kind is bool:
            low = raw.lower()
            if low not in ("true", "false"):
                raise ValueError(raw)
            return low == "true"
        if kind is int:
            value = float(raw)
            if not value.is_integer():
                raise ValueError(raw)
            return int(value)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {kind.__name__}", key) from None


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def _lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}", key)
        if not value:
            raise ConfigError(f"line {lineno}: empty value for {key!r}", key)
        yield lineno, key, value


def normalize(text: str) -> str:
    """Canonical form: comments and blanks dropped, values typed and reprinted, schema order."""
    seen = {}
    for _, key, value in _lines(text):
        seen[key] = format_value(_convert(key, value))
    order = list(SCHEMA)
    return "".join(f"{k} = {seen[k]}\n" for k in sorted(seen, key=order.index))


@dataclass
class ExperimentConfig:
    values: Dict[str, Any]
    explicit: frozenset = field(default_factory=frozenset)
    base_dir: Path = field(default_factory=Path.cwd)

    def __getattr__(self, name):
        values = self.__dict__.get("values")
        if values is not None and name in values:
            return values[name]
        raise AttributeError(name)

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def replace(self, **updates) -> "ExperimentConfig":
        for key in updates:
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key!r}", key)
        values = dict(self.values, **updates)
        cfg = ExperimentConfig(values, self.explicit | frozenset(updates), self.base_dir)
        validate(cfg)
        return cfg


def validate(cfg: ExperimentConfig) -> None:
    v = cfg.values
    if v["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"experiment: must be one of {', '.join(EXPERIMENTS)}", "experiment")
    for key in POSITIVE:
        if v.get(key) is not None and not v[key] > 0:
            raise ConfigError(f"{key}: must be positive", key)
    for key in NON_NEGATIVE:
        if v.get(key) is not None and v[key] < 0:
            raise ConfigError(f"{key}: must be non-negative", key)
    if v["zero_frac"] >= 1:
        raise ConfigError("zero_frac: must be below 1", "zero_frac")
    if not 0 < v["train_frac"] < 1:
        raise ConfigError("train_frac: must lie in (0, 1)", "train_frac")
    if v["data_in"] is not None and not cfg.resolve(v["data_in"]).is_file():
        raise ConfigError(f"data_in: file not found: {v['data_in']}", "data_in")


def parse(text: str, base_dir=None) -> ExperimentConfig:
    values = {}
    for _, key, value in _lines(text):
        values[key] = _convert(key, value)
    explicit = frozenset(values)
    for key, (_, default) in SCHEMA.items():
        if key not in values:
            if default is REQUIRED:
                raise MissingKeyError(f"missing required key {key!r}", key)
            values[key] = default
    cfg = ExperimentConfig(values, explicit, Path(base_dir) if base_dir is not None else Path.cwd())
    validate(cfg)
    return cfg


def serialize(cfg: ExperimentConfig) -> str:
    """Explicitly set keys in schema order, one ``key = value`` line each."""
    return "".join(f"{k} = {format_value(cfg.values[k])}\n" for k in SCHEMA if k in cfg.explicit)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse(path.read_text(), base_dir=path.parent)
