"""Day-ahead scheduling problem, solver settings and result containers."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..thermal import STEPS_PER_DAY, BuildingModel, simulate


@dataclass
class OptProblem:
    """Prices and penalties per step; bounds per step and per zone/actuator.

    ``disturbances`` is what the solvers see (a forecast, possibly noisy);
    ``actual_disturbances`` drives the evaluation rollout and defaults to it.
    """

    prices: np.ndarray  # (T,) $/kWh
    temp_penalty: np.ndarray  # (T,) $/(degC^2 step)
    action_penalty: float  # $/(kW^2 step)
    comfort_lower: np.ndarray  # (T, Z)
    comfort_upper: np.ndarray  # (T, Z)
    action_lower: np.ndarray  # (T, A)
    action_upper: np.ndarray  # (T, A)
    s0: np.ndarray  # (Z,)
    disturbances: np.ndarray  # (T, D)
    dt: float = 0.25
    actual_disturbances: Optional[np.ndarray] = None

    def __post_init__(self):
        self.prices = np.asarray(self.prices, dtype=np.float64)
        T = self.prices.shape[0]
        if T < 1:
            raise ValueError("horizon must be >= 1")
        self.temp_penalty = np.broadcast_to(np.asarray(self.temp_penalty, dtype=np.float64), (T,)).copy()
        self.s0 = np.asarray(self.s0, dtype=np.float64)
        Z = self.s0.shape[0]
        self.comfort_lower = np.broadcast_to(np.asarray(self.comfort_lower, dtype=np.float64).reshape(T, -1), (T, Z)).copy()
        self.comfort_upper = np.broadcast_to(np.asarray(self.comfort_upper, dtype=np.float64).reshape(T, -1), (T, Z)).copy()
        self.action_lower = np.asarray(self.action_lower, dtype=np.float64)
        self.action_upper = np.asarray(self.action_upper, dtype=np.float64)
        if self.action_lower.shape != self.action_upper.shape or self.action_lower.shape[0] != T:
            raise ValueError("action bounds must be (T, A)")
        self.disturbances = np.asarray(self.disturbances, dtype=np.float64)[:T]
        if self.disturbances.shape[0] != T:
            raise ValueError("disturbance forecast shorter than horizon")
        if self.actual_disturbances is None:
            self.actual_disturbances = self.disturbances
        else:
            self.actual_disturbances = np.asarray(self.actual_disturbances, dtype=np.float64)[:T]
        if (self.comfort_lower > self.comfort_upper).any():
            raise ValueError("comfort lower bound exceeds upper bound")
        if (self.action_lower > self.action_upper).any():
            raise ValueError("action lower bound exceeds upper bound")

    @property
    def horizon(self) -> int:
        return self.prices.shape[0]

    @property
    def zones(self) -> int:
        return self.s0.shape[0]

    @property
    def actuators(self) -> int:
        return self.action_lower.shape[1]

    def with_forecast(self, forecast: np.ndarray) -> "OptProblem":
        return OptProblem(
            self.prices, self.temp_penalty, self.action_penalty, self.comfort_lower, self.comfort_upper,
            self.action_lower, self.action_upper, self.s0, forecast, self.dt, self.actual_disturbances,
        )


def comfort_bounds(baseline: np.ndarray, narrow: float = 1.5, wide: float = 2.5, occupied=(8.0, 20.0), steps_per_hour: int = 4):
    """Symmetric band around ``baseline``: ``narrow`` during occupied hours, ``wide`` otherwise."""
    baseline = np.asarray(baseline, dtype=np.float64)
    T = baseline.shape[0]
    hour = (np.arange(T) % (24 * steps_per_hour)) / steps_per_hour
    band = np.where((hour >= occupied[0]) & (hour < occupied[1]), narrow, wide)
    if baseline.ndim == 2:
        band = band[:, None]
    return baseline - band, baseline + band


@dataclass
class SolverConfig:
    max_iter: int = 2000
    step: float = 0.05
    k1: int = 5
    k2: int = 50
    tol: float = 0.01
    radius: float = 0.01
    momentum: float = 0.9
    seed: int = 0
    fd_step: float = 1e-3  # kW, ground-truth forward differences

    def __post_init__(self):
        if self.max_iter < 1 or self.step <= 0 or self.radius <= 0:
            raise ValueError("max_iter >= 1, step > 0 and radius > 0 required")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.k1 < 1 or self.k2 < 1:
            raise ValueError("K1 and K2 must be >= 1")
        if self.fd_step <= 0:
            raise ValueError("fd_step must be positive")


@dataclass
class Costs:
    power: float
    temperature: float

    @property
    def total(self) -> float:
        return self.power + self.temperature


def zone_temperature_penalty(s: np.ndarray, problem: OptProblem) -> np.ndarray:
    """Per-zone sum over the horizon of ``P_t * (upper + lower violation^2)``."""
    hi = np.maximum(s - problem.comfort_upper, 0.0)
    lo = np.maximum(problem.comfort_lower - s, 0.0)
    with np.errstate(over="ignore", invalid="ignore"):
        return (problem.temp_penalty[:, None] * (hi * hi + lo * lo)).sum(axis=0)


def cost(a: np.ndarray, s: np.ndarray, problem: OptProblem) -> Costs:
    a = np.asarray(a, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if a.shape != problem.action_lower.shape or s.shape != problem.comfort_lower.shape:
        raise ValueError(f"shape mismatch: a{a.shape} s{s.shape}")
    power = float((problem.prices * problem.dt) @ a.sum(axis=1))
    temperature = float(zone_temperature_penalty(s, problem).sum())
    return Costs(power, temperature)


def action_violation(a: np.ndarray, problem: OptProblem) -> float:
    hi = np.maximum(a - problem.action_upper, 0.0)
    lo = np.maximum(problem.action_lower - a, 0.0)
    return float((hi * hi).sum() + (lo * lo).sum())


def penalty_objective(a: np.ndarray, s: np.ndarray, problem: OptProblem) -> float:
    """Soft-constrained objective: cost plus rho times squared action-bound violation."""
    return cost(a, s, problem).total + problem.action_penalty * action_violation(a, problem)


def project_actions(a: np.ndarray, problem: OptProblem) -> np.ndarray:
    return np.clip(a, problem.action_lower, problem.action_upper)


class Simulator:
    """Ground-truth rollout bound to a building; counts calls."""

    def __init__(self, building: BuildingModel):
        self.building = building
        self.calls = 0

    def __call__(self, s0, actions, disturbances) -> np.ndarray:
        self.calls += 1
        return simulate(self.building, s0, actions, disturbances)


def actual_rollout(a_proj: np.ndarray, problem: OptProblem, simulator) -> tuple:
    """Apply projected actions to the real building from ``s0``."""
    s = simulator(problem.s0, a_proj, problem.actual_disturbances)
    return s, cost(a_proj, s, problem)


@dataclass
class IterationLog:
    iterations: List[int] = field(default_factory=list)
    objective: List[float] = field(default_factory=list)
    step_size: List[float] = field(default_factory=list)

    def append(self, k: int, value: float, eta: float) -> None:
        self.iterations.append(k)
        self.objective.append(value)
        self.step_size.append(eta)

    def __len__(self) -> int:
        return len(self.iterations)

    def best_until(self, k: int) -> float:
        """Lowest objective among iterations ``<= k``."""
        vals = [v for i, v in zip(self.iterations, self.objective) if i <= k]
        return min(vals) if vals else float("nan")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "objective", "step_size"])
            for row in zip(self.iterations, self.objective, self.step_size):
                w.writerow([row[0], repr(row[1]), repr(row[2])])


@dataclass
class OptResult:
    method: str
    decoded_actions: np.ndarray  # a'
    projected_actions: np.ndarray  # a''
    predicted_states: np.ndarray  # s'
    actual_states: np.ndarray  # s''
    dec: Costs
    act: Costs
    log: IterationLog
    stopped_early: bool
    wall_time: float
    latent_actions: Optional[np.ndarray] = None
    sim_calls: int = 0
    sim_calls_per_iter: float = 0.0
    final_objective: float = float("nan")

    @property
    def iterations(self) -> int:
        return len(self.log)

    @property
    def per_iter_time(self) -> float:
        return self.wall_time / max(self.iterations, 1)

    def cost_table(self) -> Dict[str, float]:
        return {
            "Pow_dec": self.dec.power,
            "Pow_act": self.act.power,
            "Tem_dec": self.dec.temperature,
            "Tem_act": self.act.temperature,
            "Sum_dec": self.dec.total,
            "Sum_act": self.act.total,
        }

    def to_dict(self, timing: bool = True) -> dict:
        out = {
            "method": self.method,
            "costs": self.cost_table(),
            "iterations": self.iterations,
            "stopped_early": self.stopped_early,
            "final_objective": self.final_objective,
            "sim_calls": self.sim_calls,
            "decoded_actions": self.decoded_actions.tolist(),
            "projected_actions": self.projected_actions.tolist(),
            "predicted_states": self.predicted_states.tolist(),
            "actual_states": self.actual_states.tolist(),
        }
        if self.latent_actions is not None:
            out["latent_actions"] = self.latent_actions.tolist()
        if timing:
            out["wall_time"] = self.wall_time
            out["per_iter_time"] = self.per_iter_time
        return out

    def save(self, json_path, csv_path=None, timing: bool = False) -> None:
        with open(json_path, "w") as fh:
            json.dump(self.to_dict(timing=timing), fh, indent=1, sort_keys=True)
        if csv_path is not None:
            self.log.to_csv(csv_path)


def default_action_bounds(T: int, A: int, upper: float = 15.0):
    return np.zeros((T, A)), np.full((T, A), upper)


def day_slice(day: int) -> slice:
    return slice(day * STEPS_PER_DAY, (day + 1) * STEPS_PER_DAY)
