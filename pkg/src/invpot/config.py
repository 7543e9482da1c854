"""Run configuration: a flat ``key = value`` text format plus overrides.

Keys are the :class:`TrainConfig` field names together with the run-level
keys of :class:`RunConfig` (``problem``, ``u_layers``, ``u_width``,
``q_layers``, ``q_width``, ``resolution``, ``repeats``, ``output``).
``#`` starts a comment. Values are parsed with the type of the field they
set, so ``epochs = 2e4`` and ``relative_noise = yes`` both work.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .metrics import default_resolution
from .net import ConfigurationError, NetworkSpec
from .problem import PROBLEMS, get_problem
from .train import TrainConfig

OUTPUT_ENV = "INVPOT_OUTPUT_ROOT"

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass
class RunConfig:
    problem: str = "example1"
    u_layers: int = 3
    u_width: int = 20
    q_layers: int = 3
    q_width: int = 20
    resolution: int | None = None  # test mesh per axis; None picks 50, or 20 in 3-D
    repeats: int = 3
    output: str = ""
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigurationError(f"unknown problem {self.problem!r}; choose from {sorted(PROBLEMS)}")
        if min(self.u_layers, self.u_width, self.q_layers, self.q_width) < 1:
            raise ConfigurationError("layer counts and widths must be >= 1")
        if self.repeats < 1:
            raise ConfigurationError("repeats must be >= 1")
        if self.resolution is not None and self.resolution < 2:
            raise ConfigurationError("resolution must be >= 2")

    def get_problem(self):
        return get_problem(self.problem)

    def mesh_resolution(self) -> int:
        return self.resolution or default_resolution(self.get_problem().domain.dim)

    def specs(self) -> tuple[NetworkSpec, NetworkSpec]:
        d = self.get_problem().domain.dim
        return (NetworkSpec(d + 1, (self.u_width,) * self.u_layers, time_input=True),
                NetworkSpec(d, (self.q_width,) * self.q_layers))

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "train"}
        out.update(self.train.to_dict())
        return out

    def key(self, exclude=("output", "repeats")) -> str:
        """Stable hash of everything that affects a single training run."""
        d = {k: v for k, v in self.to_dict().items() if k not in exclude}
        return hashlib.sha1(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def with_overrides(self, **kv) -> "RunConfig":
        return apply_overrides(self, {k: v for k, v in kv.items()})

    def output_dir(self) -> Path:
        if self.output:
            return Path(self.output)
        return Path(os.environ.get(OUTPUT_ENV, "invpot-output"))


RUN_KEYS = [f.name for f in fields(RunConfig) if f.name != "train"]
TRAIN_KEYS = TrainConfig.field_names()
ALL_KEYS = RUN_KEYS + TRAIN_KEYS
_OPTIONAL_INTS = ("data_nodes", "n_boundary", "resolution")
_ALIASES = {"lambda": "lam", "nl": "u_layers", "nn": "u_width"}


def _field_type(name: str) -> type:
    if name in _OPTIONAL_INTS:
        return int
    if name in RUN_KEYS:
        return type(getattr(RunConfig(), name))
    return type(getattr(TrainConfig(), name))


def parse_value(name: str, raw):
    """Convert ``raw`` (usually a string) to the type of field ``name``."""
    if not isinstance(raw, str):
        return raw
    kind = _field_type(name)
    text = raw.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(text)
        if kind is int:
            if name in _OPTIONAL_INTS and text.lower() in ("", "none", "auto"):
                return None
            num = float(text)
            if num != int(num):
                raise ValueError(text)
            return int(num)
        if kind is float:
            return float(text)
    except ValueError:
        raise ConfigurationError(f"cannot parse {name} = {raw!r} as {kind.__name__}") from None
    return text


def canonical_key(name: str) -> str:
    key = name.strip().replace("-", "_")
    key = _ALIASES.get(key.lower(), key)
    if key not in ALL_KEYS:
        raise ConfigurationError(f"unknown configuration key {name!r}")
    return key


def apply_overrides(cfg: RunConfig, values: dict) -> RunConfig:
    run_kv, train_kv = {}, {}
    for raw_key, raw in values.items():
        key = canonical_key(raw_key)
        val = parse_value(key, raw)
        (run_kv if key in RUN_KEYS else train_kv)[key] = val
        if raw_key.lower() == "nl":
            run_kv["q_layers"] = val
        if raw_key.lower() == "nn":
            run_kv["q_width"] = val
    try:
        train = replace(cfg.train, **train_kv)
        return replace(cfg, train=train, **run_kv)
    except ValueError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(str(exc)) from None


def parse_text(text: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        cfg = apply_overrides(cfg, parse_text(Path(path).read_text()))
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return cfg


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for k, v in cfg.to_dict().items():
        lines.append(f"{k} = {'none' if v is None else v}")
    return "\n".join(lines) + "\n"
