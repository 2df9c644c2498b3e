"""Command-line entry point: ``padnet {gen,run,train,compare,prox-table}``.

Exit codes: 0 success, 2 config error, 3 solver divergence, 4 I/O error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .config import Config, ConfigError, parse_config
from .energy import Prior, oracle_prox_grid, prox_objective
from .experiment import SOLVERS, ExperimentReport, run_experiment, train_padnet
from .network import TrainingDivergence, read_networks, save_networks
from .pgm import write_pgm
from .problems import make_problem
from .solver import EXPLICIT, IMPLICIT, SolverDivergence
from .tensor import psnr, rel_error

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4


def _load_config(args) -> Config:
    cfg = parse_config(args.config) if args.config else Config()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _solvers(text: str) -> list[str]:
    names = [s.strip() for s in text.split(",") if s.strip()]
    bad = [s for s in names if s not in SOLVERS]
    if bad:
        raise ConfigError(f"unknown solver(s): {', '.join(bad)}")
    return names


def cmd_gen(args) -> int:
    cfg = _load_config(args)
    problem = make_problem(cfg.problem)
    os.makedirs(args.out, exist_ok=True)
    write_pgm(os.path.join(args.out, "ground_truth.pgm"), problem.image_truth)
    write_pgm(os.path.join(args.out, "observation.pgm"), problem.observation)
    info = {
        "problem": dataclasses.asdict(cfg.problem),
        "kernel": problem.kernel.taps.tolist(),
        "observation_recon_error": rel_error(problem.init, problem.ground_truth),
        "observation_psnr": psnr(problem.observation, problem.image_truth),
    }
    with open(os.path.join(args.out, "problem.json"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(info, indent=2) + "\n")
    print(f"wrote instance seed={cfg.problem.seed} to {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_config(args)
    solvers = _solvers(args.solvers)
    networks = {}
    if args.networks:
        for name in ("epadnet", "ipadnet"):
            path = os.path.join(args.networks, f"{name}.net")
            if name in solvers and os.path.exists(path):
                networks[name] = read_networks(path)
    report = run_experiment(cfg.problem, solvers, cfg, args.out, networks)
    print(format_table([report], [args.out]))
    diverged = [n for n, r in report.solvers.items() if r.status != "ok"]
    if diverged:
        print(f"diverged: {', '.join(diverged)}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args)
    mode = args.mode or cfg.padnet.mode
    name = "epadnet" if mode == EXPLICIT else "ipadnet"
    nets, trace = train_padnet(cfg.problem, cfg, mode)
    os.makedirs(args.out, exist_ok=True)
    save_networks(os.path.join(args.out, f"{name}.net"), nets)
    trace.write_csv(os.path.join(args.out, f"learn_{name}.csv"))
    units = ",".join(str(len(n.units)) for n in nets)
    print(f"{name}: {len(nets)} stages (units per stage {units}), K={trace.K}")
    return EXIT_OK


def _cell(val, fmt):
    return "-" if val is None else format(val, fmt)


def format_table(reports, labels) -> str:
    """Plain-text table with one row per (report, solver)."""
    head = f"{'run':<20} {'solver':<8} {'status':<9} {'K':>4} {'recon_err':>10} {'psnr_db':>8} {'time_ms':>8}"
    lines = [head, "-" * len(head)]
    for rep, label in zip(reports, labels):
        label = os.path.basename(os.path.normpath(str(label)))[:20]
        lines.append(
            f"{label:<20} {'(obs)':<8} {'':<9} {'':>4} "
            f"{rep.observation_recon_error:>10.4f} {rep.observation_psnr:>8.2f} {'':>8}"
        )
        for name, r in rep.solvers.items():
            lines.append(
                f"{label:<20} {name:<8} {r.status:<9} {r.K:>4} "
                f"{_cell(r.final_recon_error, '.4f'):>10} {_cell(r.final_psnr, '.2f'):>8} "
                f"{r.wall_time_ms:>8}"
            )
    return "\n".join(lines)


def cmd_compare(args) -> int:
    reports, labels = [], []
    for path in args.reports:
        if os.path.isdir(path):
            path = os.path.join(path, "report.json")
        with open(path, encoding="utf-8") as fh:
            reports.append(ExperimentReport.from_json(fh.read()))
        labels.append(os.path.dirname(path) or path)
    print(format_table(reports, labels))
    return EXIT_OK


def cmd_prox_table(args) -> int:
    ps = [float(p) for p in args.p.split(",")]
    ys = np.round(np.arange(args.y_min, args.y_max + 0.5 * args.y_step, args.y_step), 12)
    print(f"{'p':>5} {'y':>7} {'prox':>12} {'oracle':>12} {'obj_gap':>10}")
    worst = 0.0
    for p in ps:
        prior = Prior.from_p(p, args.w)
        for y in ys:
            x = float(prior.prox(np.array([y]))[0])
            xo = oracle_prox_grid(float(y), args.w, p)
            gap = float(prox_objective(x, y, args.w, p) - prox_objective(xo, y, args.w, p))
            worst = max(worst, gap)
            print(f"{p:>5.2f} {y:>7.3f} {x:>12.6f} {xo:>12.6f} {gap:>10.2e}")
    print(f"max objective gap (prox - oracle): {worst:.3e}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="padnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", help="config file (defaults apply when omitted)")
        p.add_argument("--seed", type=int, help="override [problem] seed")
        if out:
            p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("gen", help="synthesize an instance and write it to files")
    common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="run solvers on one instance")
    common(p)
    p.add_argument("--solvers", default=",".join(SOLVERS), help="comma-separated subset of %(default)s")
    p.add_argument("--networks", help="directory holding pre-trained epadnet.net / ipadnet.net")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("train", help="learn stage networks and write a network container")
    common(p)
    p.add_argument("--mode", choices=(EXPLICIT, IMPLICIT), help="override [padnet] mode")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="tabulate one or more report.json files")
    p.add_argument("reports", nargs="+", help="report.json files or run directories")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("prox-table", help="tabulate scalar prox values against the grid oracle")
    p.add_argument("--w", type=float, default=0.5, help="prior weight")
    p.add_argument("--p", default="0,0.5,0.8,1", help="comma-separated exponents")
    p.add_argument("--y-min", type=float, default=-3.0)
    p.add_argument("--y-max", type=float, default=3.0)
    p.add_argument("--y-step", type=float, default=0.5)
    p.set_defaults(func=cmd_prox_table)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverDivergence, TrainingDivergence) as exc:
        print(f"solver diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # parameter validation outside the config file, e.g. a bad --seed instance
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
