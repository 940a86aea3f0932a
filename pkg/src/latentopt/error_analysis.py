"""Error decompositions for the latent model and for solved-vs-actual decisions."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Dict, List, Mapping

import numpy as np

from .latent import LatentModelSet, decode, encode, latent_step
from .optimizers.problem import OptProblem, OptResult, cost, zone_temperature_penalty
from .thermal import Trajectory


class DecisionStructureError(AssertionError):
    """The simulator-based solver's state error is not explained by the projection alone."""


@dataclass
class LatentErrorReport:
    """Per-transition errors; the state-side quantities refer to ``s_{t+1}``.

    ``e_s``, ``e_a``, ``e_d``: reconstruction errors ``x - D(E(x))``.
    ``e_m``: ``s_{t+1} - D_s(F(E_s(s_t), E_a(a_t), E_d(d_t)))``.
    ``e_m_latent``: ``E_s(s_{t+1}) - F(...)``.
    """

    e_s: np.ndarray
    e_a: np.ndarray
    e_d: np.ndarray
    e_m: np.ndarray
    e_m_latent: np.ndarray
    s_latent: np.ndarray  # E_s(s_{t+1})

    def identity_gap(self, model: LatentModelSet) -> np.ndarray:
        """``(e_m - e_s) - (D_s(s~) - D_s(s~ - e~_m))``; zero up to rounding."""
        lhs = self.e_m - self.e_s
        rhs = decode(model, "s", self.s_latent) - decode(model, "s", self.s_latent - self.e_m_latent)
        return lhs - rhs

    def summary(self) -> Dict[str, float]:
        rms = lambda x: float(np.sqrt(np.mean(x * x)))
        return {"e_s": rms(self.e_s), "e_a": rms(self.e_a), "e_d": rms(self.e_d), "e_m": rms(self.e_m), "e_m_latent": rms(self.e_m_latent)}


def latent_errors(model: LatentModelSet, traj: Trajectory) -> LatentErrorReport:
    s, a, d, s_next = traj.transitions()
    z_s, z_a, z_d = encode(model, "s", s), encode(model, "a", a), encode(model, "d", d)
    z_next = encode(model, "s", s_next)
    z_pred = latent_step(model, z_s, z_a, z_d)
    return LatentErrorReport(
        e_s=s_next - decode(model, "s", z_next),
        e_a=a - decode(model, "a", z_a),
        e_d=d - decode(model, "d", z_d),
        e_m=s_next - decode(model, "s", z_pred),
        e_m_latent=z_next - z_pred,
        s_latent=z_next,
    )


@dataclass
class DecisionErrorReport:
    e_a: np.ndarray  # a'' - a'
    e_s: np.ndarray  # s'' - s'
    e: float  # C(a'', s'') - C(a', s')

    def to_dict(self) -> dict:
        return {
            "e": self.e,
            "e_a_abs_max": float(np.abs(self.e_a).max()),
            "e_s_rms": float(np.sqrt(np.mean(self.e_s**2))),
            "clamped_entries": int(np.count_nonzero(self.e_a)),
        }


def decision_errors(result: OptResult, problem: OptProblem, simulator=None) -> DecisionErrorReport:
    """Solved-vs-actual gaps.

    For the simulator-based latent solver with a known simulator and an exact
    forecast, the state gap must equal ``F(a'') - F(a')`` exactly.
    """
    a1, a2 = result.decoded_actions, result.projected_actions
    s1, s2 = result.predicted_states, result.actual_states
    report = DecisionErrorReport(a2 - a1, s2 - s1, cost(a2, s2, problem).total - cost(a1, s1, problem).total)
    exact_forecast = np.array_equal(problem.disturbances, problem.actual_disturbances)
    if result.method == "optsim" and simulator is not None and exact_forecast:
        expected = simulator(problem.s0, a2, problem.disturbances) - simulator(problem.s0, a1, problem.disturbances)
        if not np.array_equal(expected, report.e_s):
            raise DecisionStructureError("state gap differs from F(a'') - F(a')")
    return report


@dataclass(frozen=True)
class ZoneFlag:
    zone: int
    method: str
    penalty: float
    flag: int


def classify_zones(
    results: Mapping[str, OptResult],
    ground_truth: OptResult,
    problem: OptProblem,
    threshold: float = 12.0,
    varsigma: float = 1e-6,
) -> List[ZoneFlag]:
    """Flag a zone abnormal when its penalty deviates from ground truth by more than ``threshold`` relative units."""
    base = zone_temperature_penalty(ground_truth.actual_states, problem)
    flags = []
    for method in sorted(results):
        u = zone_temperature_penalty(results[method].actual_states, problem)
        ratio = np.abs((u - base) / (base + varsigma))
        for i in range(problem.zones):
            flags.append(ZoneFlag(i, method, float(u[i]), int(ratio[i] > threshold)))
    return flags


def flag_counts(flags: List[ZoneFlag]) -> Dict[str, int]:
    out: Dict[str, int] = {}
    for f in flags:
        out[f.method] = out.get(f.method, 0) + f.flag
    return out


def save_zone_flags_csv(flags: List[ZoneFlag], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["zone", "method", "penalty", "flag"])
        for f in flags:
            w.writerow([f.zone, f.method, repr(f.penalty), f.flag])
