"""Run configuration: nested YAML blocks mapped onto frozen dataclasses."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

import yaml

from .core import Params, make_params

__all__ = [
    "ConfigError",
    "ParamsBlock",
    "GridBlock",
    "SolverBlock",
    "OutputBlock",
    "SweepBlock",
    "AsymptoticsBlock",
    "TalentiBlock",
    "TailBlock",
    "RunConfig",
    "load_config",
    "parse_config",
    "dump_config",
    "config_hash",
]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ParamsBlock:
    n: int = 5
    s: float = 0.5
    # gamma as a fraction of c_emb; an absolute ``gamma`` overrides it
    gamma_fraction: float | None = 0.5
    gamma: float | None = None
    domain_radius: float = 1.0
    delta: float = 0.25


@dataclass(frozen=True)
class GridBlock:
    kind: str = "geometric"
    degree: int = 8
    inner: float = 1e-6
    ratio: float = math.sqrt(2.0)
    max_panel: float = 1.0 / 32.0
    boundary_levels: int = 4
    panels: int = 48
    exponent: float = 2.0


@dataclass(frozen=True)
class SolverBlock:
    tol: float = 1e-8
    max_iter: int = 5000
    seed: int = 0
    newton: bool = True
    warm_start: bool = True


@dataclass(frozen=True)
class OutputBlock:
    directory: str = "out"
    formats: tuple = ("csv", "json")
    cache_dir: str | None = None


@dataclass(frozen=True)
class SweepBlock:
    gamma_fractions: tuple = (0.05, 0.15, 0.3, 0.45, 0.6, 0.75, 0.85, 0.95)


@dataclass(frozen=True)
class AsymptoticsBlock:
    quantities: tuple = ("grad_sq", "l2star_pow", "gagliardo_sq", "energy_deficit")
    epsilon_count: int = 8
    epsilon_ratio: float = 2.0
    drop_largest: int = 2
    mc_samples: int = 10_000_000


@dataclass(frozen=True)
class TalentiBlock:
    dimensions: tuple = (3, 5)
    epsilons: tuple = (0.5, 1.0, 2.0)
    tolerance: float = 1e-4


@dataclass(frozen=True)
class TailBlock:
    radii: tuple = (10.0, 20.0, 40.0)
    samples: int = 10_000_000
    max_ratio: float = 2.0


_BLOCKS = {
    "params": ParamsBlock,
    "grid": GridBlock,
    "solver": SolverBlock,
    "output": OutputBlock,
    "sweep": SweepBlock,
    "asymptotics": AsymptoticsBlock,
    "talenti": TalentiBlock,
    "tail": TailBlock,
}


@dataclass(frozen=True)
class RunConfig:
    params: ParamsBlock = field(default_factory=ParamsBlock)
    grid: GridBlock = field(default_factory=GridBlock)
    solver: SolverBlock = field(default_factory=SolverBlock)
    output: OutputBlock = field(default_factory=OutputBlock)
    sweep: SweepBlock = field(default_factory=SweepBlock)
    asymptotics: AsymptoticsBlock = field(default_factory=AsymptoticsBlock)
    talenti: TalentiBlock = field(default_factory=TalentiBlock)
    tail: TailBlock = field(default_factory=TailBlock)

    def to_dict(self) -> dict:
        out = {}
        for name in _BLOCKS:
            block = dataclasses.asdict(getattr(self, name))
            out[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in block.items()}
        return out

    def make_params(self, gamma: float = 0.0) -> Params:
        """Validated :class:`Params`; ``gamma`` is the absolute coupling to use."""
        p = self.params
        try:
            return make_params(p.n, p.s, gamma, p.domain_radius, p.delta)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def grid_kwargs(self) -> dict:
        g = self.grid
        if g.kind == "geometric":
            return dict(kind=g.kind, degree=g.degree, inner=g.inner, ratio=g.ratio,
                        max_panel=g.max_panel, boundary_levels=g.boundary_levels)
        return dict(kind=g.kind, degree=g.degree, panels=g.panels, exponent=g.exponent)

    def with_overrides(self, **blocks) -> "RunConfig":
        """Copy with selected fields replaced, e.g. ``with_overrides(solver={"seed": 3})``."""
        changes = {name: dataclasses.replace(getattr(self, name), **vals) for name, vals in blocks.items()}
        return dataclasses.replace(self, **changes)


def _coerce(cls, raw, name):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"block {name!r} must be a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(raw) - set(known)
    if unknown:
        raise ConfigError(f"unknown keys in block {name!r}: {sorted(unknown)}")
    vals = {}
    for k, v in raw.items():
        default = known[k].default
        if isinstance(default, tuple) and isinstance(v, list):
            v = tuple(v)
        elif isinstance(default, bool):
            if not isinstance(v, bool):
                raise ConfigError(f"{name}.{k} must be a boolean")
        elif isinstance(default, int) and not isinstance(default, bool):
            if isinstance(v, float) and v.is_integer():
                v = int(v)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(f"{name}.{k} must be an integer")
        elif isinstance(default, float) and isinstance(v, int) and not isinstance(v, bool):
            v = float(v)
        vals[k] = v
    return cls(**vals)


def parse_config(raw: dict | None) -> RunConfig:
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping of blocks")
    unknown = set(raw) - set(_BLOCKS)
    if unknown:
        raise ConfigError(f"unknown blocks: {sorted(unknown)}")
    cfg = RunConfig(**{name: _coerce(cls, raw.get(name), name) for name, cls in _BLOCKS.items()})
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    p = cfg.params
    cfg.make_params(0.0 if p.gamma is None else p.gamma)
    if p.gamma is None and p.gamma_fraction is None:
        raise ConfigError("params needs gamma_fraction or gamma")
    if cfg.grid.kind not in ("geometric", "algebraic"):
        raise ConfigError(f"unknown grid kind {cfg.grid.kind!r}")
    if cfg.grid.degree < 1:
        raise ConfigError("grid.degree must be at least 1")
    if cfg.solver.tol <= 0 or cfg.solver.max_iter < 1:
        raise ConfigError("solver.tol must be positive and solver.max_iter at least 1")
    fr = cfg.sweep.gamma_fractions
    if any(not 0.0 < f < 1.0 for f in fr) or any(b <= a for a, b in zip(fr, fr[1:])):
        raise ConfigError("sweep.gamma_fractions must be increasing and inside (0, 1)")


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return parse_config(raw)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)


def config_hash(cfg: RunConfig) -> str:
    canon = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]
