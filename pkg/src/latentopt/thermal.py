"""Synthetic multi-zone RC building used as the ground-truth plant.

Zone temperatures follow an explicit-Euler heat balance with inter-zone
conduction, an envelope term, solar and internal gains, HVAC cooling, and a
signed-quadratic envelope nonlinearity that a linear identification cannot
represent exactly.

Disturbance row layout (D = 1 + 2Z)::

    [outdoor temp | solar gain zone 1..Z | occupancy gain zone 1..Z]
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

STEPS_PER_DAY = 96


class SimulationError(ValueError):
    def __init__(self, msg: str, time_index: Optional[int] = None):
        self.time_index = time_index
        super().__init__(msg if time_index is None else f"t={time_index}: {msg}")


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BuildingModel:
    capacities: np.ndarray  # kWh/degC
    conductances: np.ndarray  # Z x Z, kW/degC
    envelope: np.ndarray  # kW/degC
    solar_gain: np.ndarray
    conditioned: np.ndarray = None  # zone indices carrying an actuator
    cop: float = 3.6
    dt: float = 0.25  # hours
    kappa: float = 0.3

    def __post_init__(self):
        C = _frozen(self.capacities)
        U = _frozen(self.conductances)
        Uo = _frozen(self.envelope)
        g = _frozen(self.solar_gain)
        Z = C.shape[0]
        cond = np.arange(Z) if self.conditioned is None else np.asarray(self.conditioned, dtype=int)
        cond = np.array(cond)
        cond.setflags(write=False)
        object.__setattr__(self, "capacities", C)
        object.__setattr__(self, "conductances", U)
        object.__setattr__(self, "envelope", Uo)
        object.__setattr__(self, "solar_gain", g)
        object.__setattr__(self, "conditioned", cond)
        if U.shape != (Z, Z) or Uo.shape != (Z,) or g.shape != (Z,):
            raise ValueError("parameter shapes disagree with zone count")
        if (C <= 0).any():
            raise ValueError("heat capacities must be positive")
        if (U < 0).any() or not np.array_equal(U, U.T) or np.diag(U).any():
            raise ValueError("conductances must be nonnegative, symmetric, zero diagonal")
        if (Uo < 0).any():
            raise ValueError("envelope conductances must be nonnegative")
        if len(set(cond.tolist())) != cond.size or cond.size > Z or (cond.size and (cond.min() < 0 or cond.max() >= Z)):
            raise ValueError("conditioned zones must be distinct zone indices")
        ratio = self.dt * (U.sum(axis=1) + Uo) / C
        if (ratio >= 1).any():
            raise ValueError(f"time step too large for explicit update (max ratio {ratio.max():.3f})")
        # conduction and the linear part of the envelope, as one matrix
        object.__setattr__(self, "_coupling", U - np.diag(U.sum(axis=1) + Uo))
        object.__setattr__(self, "_quad", self.kappa / 20.0)
        object.__setattr__(self, "_dt_over_c", self.dt / C)

    @property
    def zones(self) -> int:
        return self.capacities.shape[0]

    @property
    def actuators(self) -> int:
        return self.conditioned.shape[0]

    @property
    def disturbance_dim(self) -> int:
        return 1 + 2 * self.zones


def make_desk_building(
    zones: int = 12,
    conditioned=None,
    kappa: float = 0.3,
    seed: int = 0,
    cop: float = 3.6,
    dt: float = 0.25,
) -> BuildingModel:
    """Corridor-style layout: zone i is coupled to i+-1 and i+-4.

    ``conditioned`` is a count (the first A zones get actuators) or a list of zone indices.
    """
    rng = np.random.default_rng(seed)
    C = rng.uniform(1.5, 3.0, zones)
    U = np.zeros((zones, zones))
    for i in range(zones):
        for j in (i + 1, i + 4):
            if j < zones:
                U[i, j] = U[j, i] = rng.uniform(0.05, 0.2)
    Uo = rng.uniform(0.08, 0.15, zones)
    g = rng.uniform(0.5, 1.0, zones)
    if conditioned is None:
        idx = np.arange(zones)
    elif isinstance(conditioned, (int, np.integer)):
        idx = np.arange(conditioned)
    else:
        idx = np.asarray(conditioned, dtype=int)
    return BuildingModel(C, U, Uo, g, idx, cop=cop, dt=dt, kappa=kappa)


def _exogenous(b: BuildingModel, a_full, d_out, sol, occ):
    """Heat-flux terms that do not depend on the current state."""
    return b.envelope * d_out + b.solar_gain * sol + occ - b.cop * a_full


def _advance(b: BuildingModel, s, exo, d_out):
    # runaway actions may overflow; callers check the rollout for non-finite values
    with np.errstate(over="ignore", invalid="ignore"):
        diff = d_out - s
        flux = b._coupling @ s + exo + b._quad * (diff * np.abs(diff))
        return s + b._dt_over_c * flux


def _full_actions(b: BuildingModel, a) -> np.ndarray:
    full = np.zeros(b.zones)
    full[b.conditioned] = a
    return full


def step(b: BuildingModel, s, a, d) -> np.ndarray:
    """One explicit-Euler transition; unconditioned zones receive no cooling."""
    s = np.asarray(s, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    Z = b.zones
    if s.shape != (Z,) or a.shape != (b.actuators,) or d.shape != (b.disturbance_dim,):
        raise SimulationError(f"shape mismatch: s{s.shape} a{a.shape} d{d.shape}")
    if not (np.isfinite(s).all() and np.isfinite(a).all() and np.isfinite(d).all()):
        raise SimulationError("non-finite input")
    exo = _exogenous(b, _full_actions(b, a), d[0], d[1 : 1 + Z], d[1 + Z :])
    return _advance(b, s, exo, d[0])


def simulate(b: BuildingModel, s0, actions, disturbances) -> np.ndarray:
    """Roll the building forward; row t is the state after applying actions[t]."""
    s = np.asarray(s0, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.float64)
    disturbances = np.asarray(disturbances, dtype=np.float64)
    T = actions.shape[0]
    Z = b.zones
    if T < 1:
        raise SimulationError("horizon must be at least 1")
    if s.shape != (Z,) or actions.shape != (T, b.actuators) or disturbances.shape[0] < T or disturbances.shape[1] != b.disturbance_dim:
        raise SimulationError(f"shape mismatch: s0{s.shape} actions{actions.shape} d{disturbances.shape}")
    for name, arr in (("s0", s), ("actions", actions), ("disturbances", disturbances[:T])):
        bad = ~np.isfinite(arr)
        if bad.any():
            t = None if arr.ndim == 1 else int(np.argwhere(bad)[0][0])
            raise SimulationError(f"non-finite {name}", t)
    full = np.zeros((T, Z))
    full[:, b.conditioned] = actions
    out = np.empty((T, Z))
    d_out = disturbances[:T, 0]
    exo = _exogenous(b, full, d_out[:, None], disturbances[:T, 1 : 1 + Z], disturbances[:T, 1 + Z :])
    for t in range(T):
        s = _advance(b, s, exo[t], d_out[t])
        out[t] = s
    return out


@dataclass(frozen=True)
class DisturbanceProfile:
    """Parameters of the synthetic weather / gain generator.

    Magnitudes are sized so that the zone heat gains are comparable to the
    cooling capacity of the actuators (COP times a few kW).
    """

    seed: int = 0
    start_day: int = 0
    outdoor_mean: float = 27.0
    outdoor_amplitude: float = 4.0
    seasonal_drift: float = 0.03  # degC per day
    ar_coef: float = 0.95
    ar_std: float = 0.25
    outdoor_band: tuple = (20.0, 35.0)
    solar_peak: tuple = (14.0, 24.0)  # kW per zone before the gain coefficient
    occupancy_base: tuple = (6.0, 9.0)  # kW, always on
    occupancy_peak: tuple = (4.0, 8.0)  # kW extra during workday hours
    workday_hours: tuple = (8.0, 18.0)


def generate_disturbances(profile: DisturbanceProfile, days: int, zones: int) -> np.ndarray:
    if days < 1:
        raise ValueError("days must be >= 1")
    T = days * STEPS_PER_DAY
    zone_rng = np.random.default_rng([profile.seed, 7919, zones])
    sol_scale = zone_rng.uniform(*profile.solar_peak, zones)
    occ_base = zone_rng.uniform(*profile.occupancy_base, zones)
    occ_peak = zone_rng.uniform(*profile.occupancy_peak, zones)
    # east/south/west facades shift the solar peak
    facade_shift = zone_rng.choice([-2.0, 0.0, 2.0], zones)

    rng = np.random.default_rng([profile.seed, profile.start_day])
    hour = (np.arange(T) % STEPS_PER_DAY) / 4.0
    day = profile.start_day + np.arange(T) // STEPS_PER_DAY
    ar = np.empty(T)
    ar[0] = rng.normal(0.0, profile.ar_std / np.sqrt(1 - profile.ar_coef**2))
    eps = rng.normal(0.0, profile.ar_std, T)
    for t in range(1, T):
        ar[t] = profile.ar_coef * ar[t - 1] + eps[t]
    outdoor = (
        profile.outdoor_mean
        + profile.seasonal_drift * day
        + profile.outdoor_amplitude * np.sin(2 * np.pi * (hour - 9.0) / 24.0)
        + ar
    )
    outdoor = np.clip(outdoor, *profile.outdoor_band)

    clearness = rng.uniform(0.5, 1.0, days)[day - profile.start_day]
    phase = (hour[:, None] - 6.0 - facade_shift[None, :]) / 12.0
    bell = np.where((phase > 0) & (phase < 1), np.sin(np.pi * np.clip(phase, 0, 1)) ** 2, 0.0)
    solar = bell * sol_scale[None, :] * clearness[:, None]

    lo, hi = profile.workday_hours
    weekday = (day % 7) < 5
    occupied = ((hour >= lo) & (hour < hi) & weekday).astype(float)
    occupancy = occ_base[None, :] + occupied[:, None] * occ_peak[None, :]
    return np.column_stack([outdoor, solar, occupancy])


@dataclass
class Trajectory:
    """Row t holds the state at time t and the action/disturbance applied during t."""

    states: np.ndarray
    actions: np.ndarray
    disturbances: np.ndarray
    start_step: int = 0

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.float64)
        self.actions = np.asarray(self.actions, dtype=np.float64)
        self.disturbances = np.asarray(self.disturbances, dtype=np.float64)
        T = self.states.shape[0]
        if self.actions.shape[0] != T or self.disturbances.shape[0] != T:
            raise ValueError("states, actions and disturbances must share the horizon")
        if self.disturbances.shape[1] != 1 + 2 * self.states.shape[1]:
            raise ValueError("disturbance width must be 1 + 2Z")

    @property
    def horizon(self) -> int:
        return self.states.shape[0]

    def transitions(self):
        """Return ``(s_t, a_t, d_t, s_{t+1})`` arrays for every consecutive pair."""
        return self.states[:-1], self.actions[:-1], self.disturbances[:-1], self.states[1:]

    def window(self, start: int, stop: int) -> "Trajectory":
        return Trajectory(self.states[start:stop], self.actions[start:stop], self.disturbances[start:stop], self.start_step + start)


@dataclass(frozen=True)
class ThermostatPolicy:
    setpoint: float = 24.0
    deadband: float = 0.5
    dither_fraction: float = 0.2
    max_power: float = 15.0


def generate_dataset(
    b: BuildingModel,
    profile: DisturbanceProfile,
    days: int,
    policy: ThermostatPolicy = ThermostatPolicy(),
    s0=None,
    dither: bool = True,
) -> Trajectory:
    """Operate the building under a hysteresis thermostat with random excitation."""
    d = generate_disturbances(profile, days, b.zones)
    T = d.shape[0]
    rng = np.random.default_rng([profile.seed, profile.start_day, 31337])
    sp = np.broadcast_to(np.asarray(policy.setpoint, dtype=float), (b.actuators,))
    noise = rng.uniform(0.0, policy.dither_fraction * policy.max_power, (T, b.actuators))
    if not dither:
        noise[:] = 0.0
    s = np.full(b.zones, float(np.mean(sp))) if s0 is None else np.asarray(s0, dtype=float)
    on = np.zeros(b.actuators, dtype=bool)
    states = np.empty((T, b.zones))
    actions = np.empty((T, b.actuators))
    Z = b.zones
    for t in range(T):
        states[t] = s
        temp = s[b.conditioned]
        on = np.where(temp > sp + policy.deadband, True, np.where(temp < sp - policy.deadband, False, on))
        a = on * (policy.max_power / 2.0) + noise[t]
        actions[t] = a
        exo = _exogenous(b, _full_actions(b, a), d[t, 0], d[t, 1 : 1 + Z], d[t, 1 + Z :])
        s = _advance(b, s, exo, d[t, 0])
    return Trajectory(states, actions, d, profile.start_day * STEPS_PER_DAY)


def add_noise(d, sigma: float, seed: int) -> np.ndarray:
    """Multiplicative Gaussian noise ``d * (1 + eps)``, ``eps ~ N(0, sigma^2)``."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    d = np.asarray(d, dtype=np.float64)
    if sigma == 0:
        return d.copy()
    eps = np.random.default_rng(seed).normal(0.0, sigma, d.shape)
    return d * (1.0 + eps)


def column_names(zones: int, actuators: int) -> list:
    return (
        ["time"]
        + [f"s_{i}" for i in range(1, zones + 1)]
        + [f"a_{i}" for i in range(1, actuators + 1)]
        + ["d_out"]
        + [f"d_sol_{i}" for i in range(1, zones + 1)]
        + [f"d_occ_{i}" for i in range(1, zones + 1)]
    )


def save_trajectory_csv(traj: Trajectory, path) -> None:
    Z = traj.states.shape[1]
    A = traj.actions.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(column_names(Z, A))
        for t in range(traj.horizon):
            row = [traj.start_step + t]
            row += [repr(float(v)) for v in traj.states[t]]
            row += [repr(float(v)) for v in traj.actions[t]]
            row += [repr(float(v)) for v in traj.disturbances[t]]
            w.writerow(row)


def load_trajectory_csv(path) -> Trajectory:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rows = list(reader)
    if not header or header[0] != "time":
        raise ValueError("first column must be 'time'")
    Z = sum(1 for h in header if h.startswith("s_"))
    A = sum(1 for h in header if h.startswith("a_"))
    if header != column_names(Z, A):
        raise ValueError("unexpected column layout")
    data = np.array([[float(v) for v in r[1:]] for r in rows], dtype=np.float64)
    first = rows[0][0] if rows else "0"
    start = int(first) if first.lstrip("-").isdigit() else 0
    return Trajectory(data[:, :Z], data[:, Z : Z + A], data[:, Z + A :], start)
