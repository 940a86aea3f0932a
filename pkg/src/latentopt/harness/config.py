"""Experiment configuration: dataclasses plus an INI reader with dotted overrides.

Example file::

    [building]
    zones = 12
    kappa = 0.3

    [training]
    epochs = 300
    latent_dims = 2, 3, 4

    [solver.optsim]
    step = 5e-5

    [suite]
    methods = gt, oriiden, orisim, optiden, optsim
    days = 0-4
"""
from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple

from ..latent import TrainConfig
from ..optimizers.problem import SolverConfig
from ..optimizers.solvers import METHODS

OUTPUT_ENV = "LATENTOPT_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass
class BuildingSpec:
    zones: int = 12
    kappa: float = 0.3
    seed: int = 0
    conditioned: Optional[Tuple[int, ...]] = None  # None: every zone has an actuator

    @property
    def actuators(self) -> int:
        return self.zones if self.conditioned is None else len(self.conditioned)


@dataclass
class ProblemSettings:
    temp_penalty_hourly: float = 0.002  # $/(degC^2 h)
    action_penalty: float = 10.0
    power_limit: float = 15.0
    narrow_band: float = 1.5
    wide_band: float = 2.5
    occupied_start: float = 8.0
    occupied_end: float = 20.0


# step sizes picked on the last training day (scripts/tune_steps.py)
TUNED_SOLVERS = {
    "gt": {"step": 5.0, "max_iter": 60},
    "oriiden": {"step": 5.0},
    "orisim": {"step": 5e-3},
    "optiden": {"step": 0.05},
    "optsim": {"step": 5e-5},
}


def default_solvers() -> Dict[str, SolverConfig]:
    return {m: SolverConfig(**TUNED_SOLVERS[m]) for m in METHODS}


@dataclass
class ExperimentConfig:
    building: BuildingSpec = field(default_factory=BuildingSpec)
    train_days: int = 61
    test_days: int = 31
    data_seed: int = 0
    training: TrainConfig = field(default_factory=TrainConfig)
    solvers: Dict[str, SolverConfig] = field(default_factory=default_solvers)
    problem: ProblemSettings = field(default_factory=ProblemSettings)
    methods: Tuple[str, ...] = METHODS
    days: Tuple[int, ...] = (0, 1, 2, 3, 4)
    sigmas: Tuple[float, ...] = tuple(round(0.1 * k, 1) for k in range(1, 11))
    noise_methods: Tuple[str, ...] = ("oriiden", "optiden", "optsim")
    noise_seed: int = 7
    scaling_zones: Tuple[int, ...] = (12, 48)
    scaling_train_days: int = 14
    scaling_epochs: int = 40
    scaling_iters: int = 3
    price_path: Optional[str] = None
    output_dir: Path = Path("runs")

    def __post_init__(self):
        for group in (self.methods, self.noise_methods):
            bad = set(group) - set(METHODS)
            if bad:
                raise ConfigError(f"unknown method(s) {sorted(bad)}; choose from {METHODS}")
        if self.train_days < 1 or self.test_days < 1:
            raise ConfigError("train_days and test_days must be >= 1")
        if any(d < 0 or d >= self.test_days for d in self.days):
            raise ConfigError(f"suite days must lie in [0, {self.test_days})")
        if any(z < 2 for z in self.scaling_zones):
            raise ConfigError("scaling zone counts must be >= 2")
        if any(s < 0 for s in self.sigmas):
            raise ConfigError("noise levels must be nonnegative")
        if self.price_path is not None and not Path(self.price_path).is_file():
            raise ConfigError(f"price file {self.price_path} does not exist")
        self.output_dir = Path(self.output_dir)


def _ints(text: str) -> Tuple[int, ...]:
    out = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(p) for p in text.replace(" ", "").split(",") if p)


def _strs(text: str) -> Tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _convert(value: str, like):
    if isinstance(like, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    if isinstance(like, tuple):
        if like and isinstance(like[0], str):
            return _strs(value)
        if like and isinstance(like[0], float):
            return _floats(value)
        return _ints(value)
    if like is None or isinstance(like, (str, Path)):
        return value.strip() or None
    raise ConfigError(f"cannot convert {value!r}")


def _update(obj, section: str, items: Iterable[Tuple[str, str]]):
    names = {f.name for f in dataclasses.fields(obj)}
    changes = {}
    for key, raw in items:
        if key not in names:
            raise ConfigError(f"[{section}] unknown key {key!r}")
        current = getattr(obj, key)
        if key == "conditioned":
            changes[key] = _ints(raw) if raw.strip() else None
        else:
            changes[key] = _convert(raw, current)
    return dataclasses.replace(obj, **changes)


_TOP_LEVEL = {
    "data": ("train_days", "test_days", "data_seed"),
    "suite": ("methods", "days"),
    "noise": ("sigmas", "noise_methods", "noise_seed"),
    "scaling": ("scaling_zones", "scaling_train_days", "scaling_epochs", "scaling_iters"),
    "paths": ("price_path", "output_dir"),
}
_ALIASES = {"noise": {"methods": "noise_methods", "seed": "noise_seed"}, "scaling": {"zones": "scaling_zones", "train_days": "scaling_train_days", "epochs": "scaling_epochs", "iters": "scaling_iters"}, "paths": {"prices": "price_path", "output": "output_dir"}}


def apply_sections(cfg: ExperimentConfig, parser: configparser.ConfigParser) -> ExperimentConfig:
    top = {}
    building, training, problem = cfg.building, cfg.training, cfg.problem
    solvers = dict(cfg.solvers)
    common = list(parser.items("solver")) if parser.has_section("solver") else []
    if common:
        solvers = {m: _update(c, "solver", common) for m, c in solvers.items()}
    for section in parser.sections():
        items = [(k, v) for k, v in parser.items(section) if k not in parser.defaults()]
        if section == "building":
            building = _update(building, section, items)
        elif section == "training":
            training = _update(training, section, items)
        elif section == "problem":
            problem = _update(problem, section, items)
        elif section == "solver":
            continue
        elif section.startswith("solver."):
            method = section.split(".", 1)[1]
            if method not in METHODS:
                raise ConfigError(f"[{section}] unknown method")
            solvers[method] = _update(solvers[method], section, items)
        elif section in _TOP_LEVEL:
            for key, raw in items:
                name = _ALIASES.get(section, {}).get(key, key)
                if name not in _TOP_LEVEL[section]:
                    raise ConfigError(f"[{section}] unknown key {key!r}")
                like = getattr(cfg, name)
                top[name] = Path(raw.strip()) if name == "output_dir" else _convert(raw, like)
        else:
            raise ConfigError(f"unknown section [{section}]")
    try:
        return dataclasses.replace(cfg, building=building, training=training, problem=problem, solvers=solvers, **top)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path=None, overrides: Iterable[str] = (), output_dir=None) -> ExperimentConfig:
    """Defaults, then the file at ``path``, then ``section.key=value`` overrides, then the output directory.

    The output directory precedence is: explicit argument, environment variable, file.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if path is not None:
        if not Path(path).is_file():
            raise ConfigError(f"config file {path} does not exist")
        parser.read(path)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        lhs, value = item.split("=", 1)
        section, key = lhs.rsplit(".", 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, value)
    try:
        cfg = apply_sections(ExperimentConfig(), parser)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    env = os.environ.get(OUTPUT_ENV)
    if output_dir is not None:
        cfg = dataclasses.replace(cfg, output_dir=Path(output_dir))
    elif env:
        cfg = dataclasses.replace(cfg, output_dir=Path(env))
    return cfg
