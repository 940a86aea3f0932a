"""Data, models and the day-ahead experiment suite, with on-disk caching of each stage."""
from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..error_analysis import classify_zones, decision_errors, flag_counts, save_zone_flags_csv
from ..latent import (
    LatentModelSet,
    TrainConfig,
    evaluate_model,
    load_model_json,
    predict_next,
    save_model_json,
    train,
)
from ..optimizers.linear import LinearModel, oriiden_identify
from ..optimizers.problem import OptProblem, OptResult, Simulator, SolverConfig, comfort_bounds
from ..optimizers.solvers import groundtruth_solve, optiden_solve, solve
from ..thermal import (
    STEPS_PER_DAY,
    BuildingModel,
    DisturbanceProfile,
    Trajectory,
    add_noise,
    generate_dataset,
    load_trajectory_csv,
    make_desk_building,
    save_trajectory_csv,
)
from .config import ExperimentConfig
from .prices import PriceSeries, bundled_price_path, ingest_prices


def _dump(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def make_building(cfg: ExperimentConfig, zones: Optional[int] = None) -> BuildingModel:
    spec = cfg.building
    z = spec.zones if zones is None else zones
    conditioned = spec.conditioned if zones is None else None
    return make_desk_building(zones=z, conditioned=conditioned, kappa=spec.kappa, seed=spec.seed)


def make_datasets(cfg: ExperimentConfig, building: BuildingModel, train_days: Optional[int] = None) -> Tuple[Trajectory, Trajectory]:
    n_train = cfg.train_days if train_days is None else train_days
    train_traj = generate_dataset(building, DisturbanceProfile(seed=cfg.data_seed), n_train)
    # the test period continues the calendar and the thermal state of the training period
    test_traj = generate_dataset(
        building, DisturbanceProfile(seed=cfg.data_seed, start_day=n_train), cfg.test_days, s0=train_traj.states[-1]
    )
    return train_traj, test_traj


def day_problem(
    cfg: ExperimentConfig,
    traj: Trajectory,
    day: int,
    prices: np.ndarray,
    forecast: Optional[np.ndarray] = None,
) -> OptProblem:
    """Day-ahead problem for ``day`` of ``traj``; comfort band around that day's measured zone-mean temperature."""
    sl = slice(day * STEPS_PER_DAY, (day + 1) * STEPS_PER_DAY)
    states = traj.states[sl]
    if states.shape[0] != STEPS_PER_DAY:
        raise ValueError(f"day {day} is outside the trajectory")
    ps = cfg.problem
    Z, A = states.shape[1], traj.actions.shape[1]
    baseline = np.repeat(states.mean(axis=1, keepdims=True), Z, axis=1)
    lower, upper = comfort_bounds(baseline, ps.narrow_band, ps.wide_band, (ps.occupied_start, ps.occupied_end))
    dt = 24.0 / STEPS_PER_DAY
    truth = traj.disturbances[sl]
    return OptProblem(
        prices=prices,
        temp_penalty=ps.temp_penalty_hourly * dt,
        action_penalty=ps.action_penalty,
        comfort_lower=lower,
        comfort_upper=upper,
        action_lower=np.zeros((STEPS_PER_DAY, A)),
        action_upper=np.full((STEPS_PER_DAY, A), ps.power_limit),
        s0=states[0],
        disturbances=truth if forecast is None else forecast,
        dt=dt,
        actual_disturbances=truth,
    )


class Workspace:
    """Lazily builds (or loads from ``cfg.output_dir``) the building, data and models."""

    def __init__(self, cfg: ExperimentConfig, log=print):
        self.cfg = cfg
        self.root = Path(cfg.output_dir)
        self.log = log or (lambda *a, **k: None)
        self._building = self._data = self._model = self._linear = self._prices = None

    @property
    def building(self) -> BuildingModel:
        if self._building is None:
            self._building = make_building(self.cfg)
        return self._building

    def data(self, regenerate: bool = False) -> Tuple[Trajectory, Trajectory]:
        if self._data is None or regenerate:
            paths = self.root / "data" / "train.csv", self.root / "data" / "test.csv"
            if all(p.is_file() for p in paths) and not regenerate:
                self._data = tuple(load_trajectory_csv(p) for p in paths)
            else:
                self._data = make_datasets(self.cfg, self.building)
                paths[0].parent.mkdir(parents=True, exist_ok=True)
                for traj, p in zip(self._data, paths):
                    save_trajectory_csv(traj, p)
                self.log(f"wrote {paths[0]} and {paths[1]}")
        return self._data

    def model(self, retrain: bool = False) -> LatentModelSet:
        path = self.root / "model.json"
        if self._model is None or retrain:
            if path.is_file() and not retrain:
                self._model = load_model_json(path)
            else:
                t0 = time.monotonic()
                result = train(self.data()[0], self.cfg.training)
                self._model = result.model
                save_model_json(self._model, path)
                _dump({"loss": result.history, "prediction": result.prediction_history, "reconstruction": result.reconstruction_history}, self.root / "training_history.json")
                self.log(f"trained latent model in {time.monotonic() - t0:.1f} s -> {path}")
        return self._model

    def linear(self, refit: bool = False) -> LinearModel:
        path = self.root / "linear.json"
        if self._linear is None or refit:
            if path.is_file() and not refit:
                with open(path) as fh:
                    self._linear = LinearModel.from_dict(json.load(fh))
            else:
                self._linear = oriiden_identify(self.data()[0])
                _dump(self._linear.to_dict(), path)
                self.log(f"identified linear model (train RMSE {self._linear.train_rmse:.4f}) -> {path}")
        return self._linear

    @property
    def prices(self) -> PriceSeries:
        if self._prices is None:
            self._prices = ingest_prices(self.cfg.price_path or bundled_price_path())
        return self._prices

    def test_day_prices(self, day: int) -> np.ndarray:
        return self.prices.day(self.cfg.train_days + day)

    def problem(self, day: int, forecast=None) -> OptProblem:
        return day_problem(self.cfg, self.data()[1], day, self.test_day_prices(day), forecast)

    def solve(self, method: str, problem: OptProblem, config: Optional[SolverConfig] = None) -> OptResult:
        needs_model = method in ("optiden", "optsim")
        return solve(
            method,
            problem,
            config or self.cfg.solvers[method],
            Simulator(self.building),
            model=self.model() if needs_model else None,
            lin=self.linear() if method == "oriiden" else None,
        )

    def model_errors(self) -> Dict[str, dict]:
        model, lin = self.model(), self.linear()
        test = self.data()[1]
        return {
            "latent": evaluate_model(lambda s, a, d: predict_next(model, s, a, d), test).summary(),
            "linear": evaluate_model(lin.predict, test).summary(),
        }


@dataclass
class SuiteOutcome:
    results: Dict[Tuple[int, str], OptResult] = field(default_factory=dict)
    problems: Dict[int, OptProblem] = field(default_factory=dict)
    failures: List[dict] = field(default_factory=list)
    report: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


def _stats(values: Sequence[float]) -> dict:
    v = np.asarray(values, dtype=float)
    return {"mean": float(v.mean()), "std": float(v.std()), "n": int(v.size)} if v.size else {"mean": None, "std": None, "n": 0}


def run_suite(cfg: ExperimentConfig, ws: Optional[Workspace] = None, write: bool = True) -> SuiteOutcome:
    """Solve every (day, method) pair; a failing pair is recorded and the suite continues."""
    ws = ws or Workspace(cfg)
    out = SuiteOutcome()
    outdir = ws.root / "suite"
    if write:
        outdir.mkdir(parents=True, exist_ok=True)
    methods = sorted(cfg.methods, key=lambda m: m != "gt")
    all_flags = []
    for day in cfg.days:
        problem = ws.problem(day)
        out.problems[day] = problem
        for method in methods:
            try:
                res = ws.solve(method, problem)
            except Exception as exc:  # recorded, suite continues
                out.failures.append({"day": day, "method": method, "error": f"{type(exc).__name__}: {exc}"})
                ws.log(f"day {day} {method}: FAILED {exc}")
                continue
            out.results[(day, method)] = res
            ws.log(f"day {day} {method}: Sum_act {res.act.total:.3f} ({res.iterations} it, {res.wall_time:.1f} s)")
            if write:
                res.save(outdir / f"day{day:02d}_{method}.json", outdir / f"day{day:02d}_{method}_iterations.csv")
        if "gt" in methods and (day, "gt") in out.results:
            others = {m: out.results[(day, m)] for m in methods if (day, m) in out.results and m != "gt"}
            flags = classify_zones(others, out.results[(day, "gt")], problem)
            all_flags.extend(flags)

    per_method = {}
    timing = {}
    for method in methods:
        runs = [(d, out.results[(d, method)]) for d in cfg.days if (d, method) in out.results]
        rs = [r for _, r in runs]
        per_method[method] = {
            "Sum_act": _stats([r.act.total for r in rs]),
            "Sum_dec": _stats([r.dec.total for r in rs]),
            "Pow_act": _stats([r.act.power for r in rs]),
            "Tem_act": _stats([r.act.temperature for r in rs]),
            "dec_act_gap": _stats([abs(r.dec.total - r.act.total) for r in rs]),
            "decision_error": _stats([decision_errors(r, out.problems[d]).e for d, r in runs]),
            "iterations": _stats([r.iterations for r in rs]),
            "best_objective_500": _stats([r.log.best_until(499) for r in rs]),
            "best_objective_2000": _stats([r.log.best_until(1999) for r in rs]),
        }
        walls = [r.wall_time for r in rs]
        iters = sum(r.iterations for r in rs)
        timing[method] = {
            "total": float(sum(walls)),
            "per_day": [float(w) for w in walls],
            "per_iteration": float(sum(walls) / max(iters, 1)),
        }
    out.report = {
        "days": list(cfg.days),
        "methods": methods,
        "per_method": per_method,
        "per_day": {
            str(d): {m: out.results[(d, m)].cost_table() for m in methods if (d, m) in out.results} for d in cfg.days
        },
        "abnormal_zones": flag_counts(all_flags) if all_flags else {},
        "failures": out.failures,
    }
    out.timing = timing
    if write:
        _dump(out.report, outdir / "report.json")
        _dump(timing, outdir / "timing.json")
        if all_flags:
            save_zone_flags_csv(all_flags, outdir / "zone_flags.csv")
    return out


@dataclass
class NoiseOutcome:
    results: Dict[Tuple[float, int, str], OptResult] = field(default_factory=dict)
    failures: List[dict] = field(default_factory=list)
    report: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


def noisy_forecast(truth: np.ndarray, sigma: float, seed: int, day: int) -> np.ndarray:
    # one draw per (seed, day), shared by every method and scaled by sigma
    return add_noise(truth, sigma, seed * 100003 + day)


def run_noise_sweep(cfg: ExperimentConfig, sigmas: Optional[Sequence[float]] = None, ws: Optional[Workspace] = None, write: bool = True) -> NoiseOutcome:
    """Solvers plan on a noisy disturbance forecast; the actual rollout uses the true disturbances."""
    ws = ws or Workspace(cfg)
    sigmas = tuple(cfg.sigmas if sigmas is None else sigmas)
    out = NoiseOutcome()
    test = ws.data()[1]
    for sigma in sigmas:
        for day in cfg.days:
            truth = test.disturbances[day * STEPS_PER_DAY : (day + 1) * STEPS_PER_DAY]
            problem = ws.problem(day, forecast=noisy_forecast(truth, sigma, cfg.noise_seed, day))
            for method in cfg.noise_methods:
                try:
                    out.results[(sigma, day, method)] = ws.solve(method, problem)
                except Exception as exc:
                    out.failures.append({"sigma": sigma, "day": day, "method": method, "error": f"{type(exc).__name__}: {exc}"})
                    continue
            ws.log(f"sigma {sigma} day {day}: " + ", ".join(
                f"{m} {out.results[(sigma, day, m)].act.total:.2f}" for m in cfg.noise_methods if (sigma, day, m) in out.results
            ))
    table = {}
    spread = {}
    for method in cfg.noise_methods:
        means = []
        for sigma in sigmas:
            vals = [out.results[(sigma, d, method)].act.total for d in cfg.days if (sigma, d, method) in out.results]
            table.setdefault(repr(float(sigma)), {})[method] = _stats(vals)
            if vals:
                means.append(float(np.mean(vals)))
        spread[method] = float(np.std(means)) if means else None
    out.report = {"sigmas": [float(s) for s in sigmas], "days": list(cfg.days), "Sum_act": table, "std_over_sigma": spread, "failures": out.failures}
    if write:
        _dump(out.report, ws.root / "noise" / "report.json")
    return out


def scaled_latent_dims(zones: int) -> Tuple[int, int, int]:
    """Latent sizes grow with log2(Z): (2, 3, 4) at Z = 12, (4, 5, 6) at Z = 48."""
    n_s = max(2, int(round(math.log2(zones))) - 2)
    return n_s, n_s + 1, n_s + 2


def run_scaling(cfg: ExperimentConfig, zones: Optional[Sequence[int]] = None, ws: Optional[Workspace] = None, write: bool = True) -> dict:
    """Per zone count: latent sizes, reduction ratio, model errors and per-iteration solver time."""
    ws = ws or Workspace(cfg)
    zones = tuple(cfg.scaling_zones if zones is None else zones)
    rows = []
    prices = ws.test_day_prices(0)
    for z in zones:
        if z < 2:
            raise ValueError("zone counts must be >= 2")
        building = make_building(cfg, zones=z)
        sub = _replace_days(cfg, cfg.scaling_train_days)
        train_traj, test_traj = make_datasets(sub, building, cfg.scaling_train_days)
        tcfg = TrainConfig(**{**cfg.training.__dict__, "epochs": cfg.scaling_epochs, "latent_dims": scaled_latent_dims(z)})
        t0 = time.monotonic()
        model = train(train_traj, tcfg).model
        train_time = time.monotonic() - t0
        lin = oriiden_identify(train_traj)
        latent_err = evaluate_model(lambda s, a, d: predict_next(model, s, a, d), test_traj).summary()
        linear_err = evaluate_model(lin.predict, test_traj).summary()
        problem = day_problem(sub, test_traj, 0, prices)
        budget = SolverConfig(max_iter=cfg.scaling_iters, step=cfg.solvers["optiden"].step)
        t_opt = optiden_solve(problem, model, budget, Simulator(building))
        t_gt = groundtruth_solve(problem, Simulator(building), SolverConfig(max_iter=1, step=cfg.solvers["gt"].step))
        orig = sum(model.original_dims)
        rows.append({
            "zones": z,
            "original_dims": list(model.original_dims),
            "latent_dims": list(model.latent_dims),
            "reduction_ratio": sum(model.latent_dims) / orig,
            "latent_rmse": latent_err["rmse"][0],
            "linear_rmse": linear_err["rmse"][0],
            "train_seconds": train_time,
            "optiden_per_iter": t_opt.per_iter_time,
            "gt_per_iter": t_gt.per_iter_time,
            "gt_sim_calls_per_iter": t_gt.sim_calls_per_iter,
        })
        ws.log(f"Z={z}: dims {model.latent_dims} ratio {rows[-1]['reduction_ratio']:.3f} optiden {t_opt.per_iter_time * 1e3:.1f} ms/it gt {t_gt.per_iter_time:.2f} s/it")
    report = {"rows": rows, "reference_1080_zones": {"original_dims": 4201, "latent_dims": 15}}
    if write:
        _dump(report, ws.root / "scaling" / "report.json")
    return report


def _replace_days(cfg: ExperimentConfig, train_days: int) -> ExperimentConfig:
    return dataclasses.replace(cfg, train_days=train_days, test_days=max(1, min(cfg.test_days, 2)), days=(0,))
