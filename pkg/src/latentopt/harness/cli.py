"""``latentopt`` command-line entry point."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import OUTPUT_ENV, ConfigError, load_config
from .experiments import Workspace, run_noise_sweep, run_scaling, run_suite
from ..optimizers.solvers import METHODS


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [building], [training], [solver.<method>], ... sections")
    common.add_argument("--output-dir", help=f"output directory (else ${OUTPUT_ENV}, else the config's [paths] output)")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override one config entry")
    common.add_argument("--prices", help="price CSV with header timestamp,price")
    common.add_argument("--quiet", action="store_true")

    p = argparse.ArgumentParser(prog="latentopt", description="Latent-space day-ahead HVAC scheduling experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="simulate the training and test datasets")
    sub.add_parser("train", parents=[common], help="train the latent model set")
    sub.add_parser("identify-linear", parents=[common], help="fit the affine one-step model")
    opt = sub.add_parser("optimize", parents=[common], help="solve one test day with one method")
    opt.add_argument("--method", required=True, choices=METHODS)
    opt.add_argument("--day", type=int, required=True)
    suite = sub.add_parser("suite", parents=[common], help="all methods over the configured test days")
    suite.add_argument("--methods", help="comma-separated subset of " + ",".join(METHODS))
    suite.add_argument("--days", help="e.g. 0-4 or 0,2,5")
    noise = sub.add_parser("noise-sweep", parents=[common], help="noisy disturbance forecasts")
    noise.add_argument("--sigmas", help="comma-separated noise levels")
    scale = sub.add_parser("scaling", parents=[common], help="vary the number of zones")
    scale.add_argument("--zones", help="comma-separated zone counts")
    sub.add_parser("report", parents=[common], help="summarise the reports found in the output directory")
    return p


def _overrides(args) -> list:
    sets = list(args.set)
    if args.prices:
        sets.append(f"paths.prices={args.prices}")
    if getattr(args, "methods", None):
        sets.append(f"suite.methods={args.methods}")
    if getattr(args, "days", None):
        sets.append(f"suite.days={args.days}")
    if getattr(args, "sigmas", None):
        sets.append(f"noise.sigmas={args.sigmas}")
    if getattr(args, "zones", None):
        sets.append(f"scaling.zones={args.zones}")
    return sets


def _summary(root: Path) -> dict:
    out = {}
    for name in ("suite/report.json", "suite/timing.json", "noise/report.json", "scaling/report.json"):
        path = root / name
        if path.is_file():
            with open(path) as fh:
                out[name] = json.load(fh)
    return out


def _print_summary(summary: dict) -> None:
    suite = summary.get("suite/report.json")
    if suite:
        print("method     Sum_act mean     std     |dec-act|")
        for m, row in suite["per_method"].items():
            s = row["Sum_act"]
            if s["n"]:
                print(f"{m:<9} {s['mean']:>12.3f} {s['std']:>8.3f} {row['dec_act_gap']['mean']:>12.4f}")
    timing = summary.get("suite/timing.json")
    if timing:
        print("method     total s    per-iteration s")
        for m, row in timing.items():
            print(f"{m:<9} {row['total']:>9.2f} {row['per_iteration']:>14.5f}")
    noise = summary.get("noise/report.json")
    if noise:
        print("std of mean Sum_act over noise levels:", {k: round(v, 4) for k, v in noise["std_over_sigma"].items() if v is not None})
    scaling = summary.get("scaling/report.json")
    if scaling:
        for row in scaling["rows"]:
            print(f"Z={row['zones']}: latent {row['latent_dims']} ratio {row['reduction_ratio']:.3f}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args), args.output_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    ws = Workspace(cfg, log=None if args.quiet else print)
    cmd = args.command
    try:
        if cmd == "generate":
            ws.data(regenerate=True)
        elif cmd == "train":
            ws.model(retrain=True)
            errs = ws.model_errors()
            print(json.dumps(errs, indent=1))
        elif cmd == "identify-linear":
            ws.linear(refit=True)
        elif cmd == "optimize":
            res = ws.solve(args.method, ws.problem(args.day))
            stem = ws.root / "optimize" / f"day{args.day:02d}_{args.method}"
            stem.parent.mkdir(parents=True, exist_ok=True)
            res.save(stem.with_suffix(".json"), stem.parent / (stem.name + "_iterations.csv"), timing=True)
            print(json.dumps(res.cost_table(), indent=1))
        elif cmd == "suite":
            return 0 if run_suite(cfg, ws).ok else 1
        elif cmd == "noise-sweep":
            return 0 if run_noise_sweep(cfg, ws=ws).ok else 1
        elif cmd == "scaling":
            run_scaling(cfg, ws=ws)
        elif cmd == "report":
            summary = _summary(ws.root)
            if not summary:
                print(f"no reports under {ws.root}", file=sys.stderr)
                return 1
            with open(ws.root / "summary.json", "w") as fh:
                json.dump(summary, fh, indent=1, sort_keys=True)
            _print_summary(summary)
    except Exception as exc:
        print(f"{cmd} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
