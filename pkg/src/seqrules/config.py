"""Run configuration: YAML in, validated dataclasses out, resolved YAML echoed back."""

from __future__ import annotations

import difflib
import hashlib
import json
import types
import typing
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

import yaml

from .data import Dataset, gen_synthetic, load_mnist_dir, load_ucr, znormalize
from .errors import ConfigError, InvalidArgument
from .train import TrainConfig

DATASET_KINDS = ("synthetic", "ucr", "mnist")
RESOLVED_NAME = "config.resolved.yaml"


@dataclass
class DatasetSpec:
    kind: str = "synthetic"
    path: str | None = None  # UCR directory/split file, or MNIST directory
    synthetic: str = "triangular"
    n_per_class: int = 2
    noise_std: float = 0.1 ** 0.5
    data_seed: int = 0
    pos_digit: int = 1
    neg_digit: int = 0
    train_per_class: int | None = None
    test_per_class: int | None = None
    znormalize: bool = False


@dataclass
class RunConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    out: str = "runs/default"
    target: int | None = None  # None: class 1 for binary data, every class otherwise

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> "RunConfig":
        spec = self.dataset
        if spec.kind not in DATASET_KINDS:
            raise ConfigError(f"dataset.kind: expected one of {DATASET_KINDS}, got {spec.kind!r}")
        if spec.kind == "synthetic":
            if spec.synthetic not in ("triangular", "trigonometric"):
                raise ConfigError(f"dataset.synthetic: unknown kind {spec.synthetic!r}")
        else:
            if spec.path is None:
                raise ConfigError(f"dataset.path is required for kind {spec.kind!r}")
            if not Path(spec.path).exists():
                raise ConfigError(f"dataset.path: {spec.path} does not exist")
        try:
            self.train.validate()
        except InvalidArgument as exc:
            raise ConfigError(f"train: {exc}") from None
        return self


# -- type checking against dataclass annotations -----------------------------------


def _type_name(tp) -> str:
    return getattr(tp, "__name__", None) or str(tp).replace("typing.", "")


def _coerce(value, tp, where: str):
    """Check ``value`` against annotation ``tp``; ints are accepted for floats."""
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(value, inner[0], where)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {type(value).__name__}")
        return [_coerce(v, args[0], f"{where}[{i}]") for i, v in enumerate(value)] if args else value
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if is_dataclass(tp):
        return _build(tp, value, where)
    raise ConfigError(f"{where}: unsupported field type {_type_name(tp)}")


def _build(cls, data, where: str = ""):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = [f.name for f in fields(cls)]
    kwargs = {}
    for key, value in data.items():
        path = f"{where}.{key}" if where else str(key)
        if key not in names:
            close = difflib.get_close_matches(str(key), names, n=1)
            hint = f" (did you mean {close[0]!r}?)" if close else ""
            raise ConfigError(f"unknown key {path!r}{hint}")
        kwargs[key] = _coerce(value, hints[key], path)
    return cls(**kwargs)


# -- public API ------------------------------------------------------------------------


def resolve_path(p, base: Path | None = None) -> Path:
    p = Path(p)
    return p if p.is_absolute() or base is None else base / p


def config_from_dict(data) -> RunConfig:
    return _build(RunConfig, data)


def parse_config(path) -> RunConfig:
    """Read a YAML run config; omitted fields take their defaults.

    Relative dataset paths are checked against the current directory first
    and then against the config file's directory.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    cfg = config_from_dict(data)
    spec = cfg.dataset
    if spec.path is not None and not Path(spec.path).exists():
        alt = resolve_path(spec.path, path.parent)
        if alt.exists():
            spec.path = str(alt)
    return cfg.validate()


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)


def write_resolved(cfg: RunConfig, out_dir) -> Path:
    """Echo the fully resolved config next to the run's outputs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / RESOLVED_NAME
    target.write_text(dump_config(cfg))
    return target


def config_hash(cfg: RunConfig) -> str:
    canon = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def load_dataset(spec: DatasetSpec) -> Dataset:
    if spec.kind == "synthetic":
        ds = gen_synthetic(spec.synthetic, spec.n_per_class, spec.noise_std, seed=spec.data_seed)
    elif spec.kind == "ucr":
        ds = load_ucr(spec.path)
    elif spec.kind == "mnist":
        ds = load_mnist_dir(spec.path, spec.pos_digit, spec.neg_digit,
                            train_per_class=spec.train_per_class,
                            test_per_class=spec.test_per_class)
    else:
        raise ConfigError(f"unknown dataset kind {spec.kind!r}")
    return znormalize(ds) if spec.znormalize else ds
