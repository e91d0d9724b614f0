"""Run configuration: JSON file plus dotted ``key=value`` overrides."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .diffusion import Boundary, DiffusionModel
from .errors import ConfigError
from .payoff import AffineIndicator, Power, RewardSpec

MODEL_PARAMS = {"gbm": ("m", "beta"), "ou": ("delta", "m", "sigma"), "abm": ("mu", "sigma")}
REWARD_PARAMS = {"power": ("k0", "gamma0", "k1", "gamma1"), "affine_indicator": ("K",)}


@dataclass
class ModelConfig:
    kind: str = "gbm"
    parameters: dict = field(default_factory=dict)
    alpha: float = 0.1
    interval: list | None = None          # [c, d]; null means unbounded on that side
    left: str = "natural"
    right: str = "natural"


@dataclass
class RewardsConfig:
    family: str = "power"
    parameters: dict = field(default_factory=dict)
    H01: float = 1.0
    H10: float = 1.0


@dataclass
class SolveConfig:
    grid_points: int = 4000
    tol: float = 1e-9
    max_iter: int = 500
    scan_points: int = 10_000


@dataclass
class VerifyConfig:
    enable_iteration: bool = True
    enable_mc: bool = True
    mc_seed: int = 20240917
    mc_paths: int = 100_000
    mc_dt: float = 1e-3


@dataclass
class OutputConfig:
    report: str = "report.json"
    table: str = "table.csv"
    x_min: float | None = None
    x_max: float | None = None
    points: int = 200


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    rewards: RewardsConfig = field(default_factory=RewardsConfig)
    solve: SolveConfig = field(default_factory=SolveConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


_SECTIONS = {f.name: f.type for f in dataclasses.fields(RunConfig)}
_SECTION_TYPES = {"model": ModelConfig, "rewards": RewardsConfig, "solve": SolveConfig,
                  "verify": VerifyConfig, "output": OutputConfig}


def bundled_config(name: str) -> Path | None:
    fname = name if name.endswith(".json") else name + ".json"
    ref = resources.files("switchbench") / "configs" / fname
    return Path(str(ref)) if ref.is_file() else None


def _check_type(path: str, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
    elif isinstance(default, int) and not isinstance(default, bool):
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
    elif isinstance(default, float):
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
    elif isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
    elif isinstance(default, dict):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected an object, got {value!r}")


def _build(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level of the config must be a JSON object")
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    sections = {}
    for name, cls in _SECTION_TYPES.items():
        data = raw.get(name, {})
        if not isinstance(data, dict):
            raise ConfigError(f"{name}: expected an object")
        proto = cls()
        names = {f.name for f in dataclasses.fields(cls)}
        bad = set(data) - names
        if bad:
            raise ConfigError(f"unknown key(s) in {name}: {', '.join(sorted(bad))}")
        for k, v in data.items():
            default = getattr(proto, k)
            if v is not None and default is not None:
                _check_type(f"{name}.{k}", v, default)
        kwargs = {k: (float(v) if isinstance(getattr(proto, k), float) and v is not None else v)
                  for k, v in data.items()}
        sections[name] = cls(**kwargs)
    cfg = RunConfig(**sections)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    m, r = cfg.model, cfg.rewards
    if m.kind not in MODEL_PARAMS:
        raise ConfigError(f"model.kind: unknown kind {m.kind!r} (expected one of {sorted(MODEL_PARAMS)})")
    need = set(MODEL_PARAMS[m.kind])
    if set(m.parameters) != need:
        raise ConfigError(f"model.parameters: {m.kind} needs exactly {sorted(need)}, got {sorted(m.parameters)}")
    if r.family not in REWARD_PARAMS:
        raise ConfigError(f"rewards.family: unknown family {r.family!r}")
    need = set(REWARD_PARAMS[r.family])
    if set(r.parameters) != need:
        raise ConfigError(f"rewards.parameters: {r.family} needs exactly {sorted(need)}, got {sorted(r.parameters)}")
    for side in ("left", "right"):
        if getattr(m, side) not in ("natural", "absorbing"):
            raise ConfigError(f"model.{side}: expected 'natural' or 'absorbing'")
    positive = [("model.alpha", m.alpha), ("solve.grid_points", cfg.solve.grid_points),
                ("solve.tol", cfg.solve.tol), ("solve.scan_points", cfg.solve.scan_points),
                ("verify.mc_paths", cfg.verify.mc_paths), ("verify.mc_dt", cfg.verify.mc_dt),
                ("output.points", cfg.output.points)]
    for key, v in positive:
        if not v > 0:
            raise ConfigError(f"{key}: must be positive, got {v}")
    if cfg.solve.max_iter < 0:
        raise ConfigError("solve.max_iter: must be nonnegative")


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(raw: dict, overrides) -> dict:
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        node = raw
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key}: {p} is not an object")
        node[parts[-1]] = parse_value(text)
    return raw


def load_config(path, overrides=()) -> RunConfig:
    p = Path(path)
    if not p.exists():
        alt = bundled_config(str(path))
        if alt is None:
            raise ConfigError(f"config file {path} not found")
        p = alt
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")
    return _build(apply_overrides(raw, overrides))


def _endpoint(v, default):
    return default if v is None else float(v)


def build_model(cfg: RunConfig) -> DiffusionModel:
    m = cfg.model
    p = {k: float(v) for k, v in m.parameters.items()}
    left, right = Boundary(m.left), Boundary(m.right)
    try:
        if m.kind == "gbm":
            return DiffusionModel.gbm(p["m"], p["beta"], m.alpha, left=left)
        iv = m.interval or [None, None]
        interval = (_endpoint(iv[0], -math.inf), _endpoint(iv[1], math.inf))
        if m.kind == "ou":
            return DiffusionModel.ou(p["delta"], p["m"], p["sigma"], m.alpha, interval, left, right)
        return DiffusionModel.abm(p["mu"], p["sigma"], m.alpha, interval, left, right)
    except ValueError as exc:
        raise ConfigError(f"model: {exc}")


def build_rewards(cfg: RunConfig) -> RewardSpec:
    r = cfg.rewards
    p = {k: float(v) for k, v in r.parameters.items()}
    fam = Power(p["k0"], p["gamma0"], p["k1"], p["gamma1"]) if r.family == "power" else AffineIndicator(p["K"])
    return RewardSpec(fam, float(r.H01), float(r.H10))
