"""Grid-search the initial step size of each solver on the last training day.

Usage: python3 scripts/tune_steps.py [output_dir] [method ...]

The test days are never touched.  A step that makes the objective non-finite
is reported as FAIL; the chosen defaults live in latentopt.harness.config.
"""
import sys
import warnings

from latentopt.harness.config import load_config
from latentopt.harness.experiments import Workspace, day_problem
from latentopt.optimizers import SolverConfig, SolverError

GRID = {
    "gt": (1.0, 5.0, 20.0),
    "oriiden": (0.5, 5.0, 20.0),
    "orisim": (1e-3, 5e-3, 1e-2),
    "optiden": (0.01, 0.05, 0.2),
    "optsim": (2e-5, 5e-5, 1e-4),
}


def main(argv):
    root = argv[0] if argv else "runs"
    methods = argv[1:] or [m for m in GRID if m != "gt"]
    cfg = load_config(None, [], root)
    ws = Workspace(cfg)
    train_traj = ws.data()[0]
    day = cfg.train_days - 1
    problem = day_problem(cfg, train_traj, day, ws.prices.day(day))
    warnings.simplefilter("ignore", RuntimeWarning)
    for method in methods:
        for step in GRID[method]:
            base = cfg.solvers[method]
            sc = SolverConfig(**{**base.__dict__, "step": step})
            try:
                r = ws.solve(method, problem, sc)
            except SolverError as exc:
                print(f"{method:<8} step {step:<8g} FAIL at iteration {exc.iteration}")
                continue
            print(f"{method:<8} step {step:<8g} Sum_act {r.act.total:9.3f}  C@500 {r.log.best_until(499):9.3f}  iterations {r.iterations}")


if __name__ == "__main__":
    main(sys.argv[1:])
