"""Experiment configuration: JSON or YAML documents validated into dataclasses."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

KINDS = (
    "return-law",
    "entry-law",
    "thin-annuli",
    "doubling",
    "bad-radii",
    "dimension",
    "pressure",
    "hsv-bound",
    "parabolic-asymptotics",
)


class ConfigError(ValueError):
    """Invalid configuration; ``where`` names the key path or source line."""

    def __init__(self, message: str, where: str = ""):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


@dataclass(frozen=True)
class SystemSpec:
    name: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LawParams:
    words: list = field(default_factory=list)
    ball_center: Optional[float] = None
    ball_radius: Optional[float] = None
    ball_depth: int = 40
    n_samples: int = 50_000
    horizon: Optional[int] = None
    ks_tol: float = 0.03


@dataclass(frozen=True)
class AnnuliParams:
    n_points: int = 100
    base: int = 3
    k_min: int = 5
    k_max: int = 10
    jitter: float = 0.1
    kappa: dict = field(default_factory=lambda: {"kind": "constant", "c": 3})
    generation_cap: int = 40
    threshold: float = 1e-3


@dataclass(frozen=True)
class DoublingParams:
    n_points: int = 100
    j_min: int = 6
    j_max: int = 16
    eps: float = 0.5
    generation_cap: int = 40


@dataclass(frozen=True)
class BadRadiiParams:
    x: float = 0.5
    A: list = field(default_factory=lambda: [0.01, 1e-4])
    j_min: int = 4
    j_max: int = 30
    kappa: dict = field(default_factory=lambda: {"kind": "constant", "c": 3})
    eps: float = 0.5
    gamma_j_min: int = 10
    generation_cap: int = 100


@dataclass(frozen=True)
class DimensionParams:
    points: list = field(default_factory=lambda: [0.0])
    base: int = 2
    k_min: int = 4
    k_max: int = 20
    generation_cap: int = 60
    tol: float = 1e-6
    expected: Optional[float] = None


@dataclass(frozen=True)
class PressureParams:
    t: list = field(default_factory=lambda: [0.0])
    bowen: bool = True
    tol: float = 1e-9


@dataclass(frozen=True)
class HsvParams:
    words: list = field(default_factory=list)
    depth: int = 0
    N_max: int = 50
    dps: int = 50


@dataclass(frozen=True)
class ParabolicParams:
    t: list = field(default_factory=lambda: [0.8])
    n: list = field(default_factory=lambda: [10, 100, 1000])
    x: float = 1.0
    N_trunc: int = 1000


PARAMS = {
    "return-law": LawParams,
    "entry-law": LawParams,
    "thin-annuli": AnnuliParams,
    "doubling": DoublingParams,
    "bad-radii": BadRadiiParams,
    "dimension": DimensionParams,
    "pressure": PressureParams,
    "hsv-bound": HsvParams,
    "parabolic-asymptotics": ParabolicParams,
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    system: SystemSpec
    params: Any
    seed: int = 0
    output_dir: str = "results"
    name: str = "experiment"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "name": self.name,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "system": {"name": self.system.name, "params": self.system.params},
            "params": dataclasses.asdict(self.params),
        }


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigError("expected a mapping", where)
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown}", where)
    missing = [n for n, f in names.items()
               if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING and n not in data]
    if missing:
        raise ConfigError(f"missing key(s) {missing}", where)
    kwargs = {}
    for k, v in data.items():
        f = names[k]
        default = f.default if f.default is not dataclasses.MISSING else (
            f.default_factory() if f.default_factory is not dataclasses.MISSING else None)
        if isinstance(default, bool) and not isinstance(v, bool):
            raise ConfigError("expected a boolean", f"{where}.{k}")
        if isinstance(default, (int, float)) and not isinstance(default, bool):
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ConfigError("expected a number", f"{where}.{k}")
            if isinstance(default, int) and not isinstance(v, int):
                raise ConfigError("expected an integer", f"{where}.{k}")
        if isinstance(default, (list, dict)) and not isinstance(v, type(default)):
            raise ConfigError(f"expected a {type(default).__name__}", f"{where}.{k}")
        kwargs[k] = v
    return cls(**kwargs)


def _check_ranges(cfg: ExperimentConfig):
    p = cfg.params
    positive = ["n_samples", "n_points", "generation_cap", "N_max", "N_trunc", "dps"]
    for name in positive:
        if hasattr(p, name) and getattr(p, name) <= 0:
            raise ConfigError("must be positive", f"params.{name}")
    for lo, hi in (("k_min", "k_max"), ("j_min", "j_max")):
        if hasattr(p, lo) and getattr(p, lo) > getattr(p, hi):
            raise ConfigError(f"{lo} exceeds {hi}", f"params.{lo}")
    if hasattr(p, "jitter") and not 0 <= p.jitter < 0.5:
        raise ConfigError("must lie in [0, 0.5)", "params.jitter")
    if hasattr(p, "generation_cap") and p.generation_cap > 400:
        raise ConfigError("must be at most 400", "params.generation_cap")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer", "seed")


def parse_config(data: Any) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping")
    allowed = {"kind", "system", "params", "seed", "output_dir", "name"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown}", "<root>")
    kind = data.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {list(KINDS)}", "kind")
    if "system" not in data:
        raise ConfigError("missing key", "system")
    system = _build(SystemSpec, data["system"], "system")
    from ..gallery import list_systems

    if system.name not in list_systems():
        raise ConfigError(f"unknown system {system.name!r}", "system.name")
    params = _build(PARAMS[kind], data.get("params", {}), "params")
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("expected an integer", "seed")
    cfg = ExperimentConfig(kind, system, params, seed, str(data.get("output_dir", "results")),
                           str(data.get("name", kind)))
    _check_ranges(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    """Read a JSON (``.json``) or YAML document; parse errors carry the line."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(exc.msg, f"{path}:{exc.lineno}") from exc
    else:
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            line = f":{mark.line + 1}" if mark is not None else ""
            raise ConfigError(str(getattr(exc, "problem", exc)), f"{path}{line}") from exc
    return parse_config(data)
