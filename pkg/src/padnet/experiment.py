"""Experiment orchestration: one synthetic instance, several solvers, files on disk.

Every solver in a run consumes the same synthesized instance.  The learned
solvers are trained on ``train.batch`` further instances drawn from the same
problem family with seeds ``seed + TRAIN_SEED_OFFSET + i``.
"""
from __future__ import annotations

import dataclasses
import json
import os
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .baselines import admm_solve, hqs_solve
from .config import Config
from .energy import Prior
from .network import BuiltInNetwork, TrainingDivergence, TrainingPair, save_networks
from .pgm import write_pgm
from .problems import Problem, ProblemSpec, make_problem
from .solver import (
    EXPLICIT,
    IMPLICIT,
    SolverDivergence,
    Trace,
    init_state,
    padnet_infer,
    padnet_learn,
)
from .tensor import psnr, rel_error

__all__ = [
    "SOLVERS",
    "TRAIN_SEED_OFFSET",
    "SolverResult",
    "ExperimentReport",
    "training_problems",
    "train_padnet",
    "solve",
    "run_experiment",
]

SOLVERS = ("admm", "hqs", "epadnet", "ipadnet")
TRAIN_SEED_OFFSET = 100
_MODES = {"epadnet": EXPLICIT, "ipadnet": IMPLICIT}


def _for_mode(problem: Problem, mode: str):
    return problem.model.with_prior(Prior.implicit()) if mode == IMPLICIT else problem.model


def training_problems(spec: ProblemSpec, count: int) -> list[Problem]:
    return [
        make_problem(dataclasses.replace(spec, seed=spec.seed + TRAIN_SEED_OFFSET + i))
        for i in range(count)
    ]


def train_padnet(spec: ProblemSpec, cfg: Config, mode: str) -> tuple[list[BuiltInNetwork], Trace]:
    """Learn per-stage networks on the training instances of ``spec``."""
    solver_cfg = dataclasses.replace(cfg.padnet, mode=mode)
    probs = training_problems(spec, cfg.train.batch)
    models = [_for_mode(p, mode) for p in probs]
    data = [TrainingPair(p.init, p.ground_truth) for p in probs]
    return padnet_learn(models, data, solver_cfg, cfg.train)


def solve(
    problem: Problem,
    solver: str,
    cfg: Config,
    nets: Sequence[BuiltInNetwork] | None = None,
) -> tuple[np.ndarray, Trace, list[BuiltInNetwork] | None]:
    """Run one solver on ``problem``; PADNet variants train first unless ``nets`` is given."""
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; expected one of {', '.join(SOLVERS)}")
    gt = problem.ground_truth
    if solver == "admm":
        x, trace = admm_solve(problem.model, cfg.baseline, init_state(problem.init), gt)
        return x, trace, None
    if solver == "hqs":
        x, trace = hqs_solve(problem.model, cfg.baseline, init_state(problem.init), gt)
        return x, trace, None
    mode = _MODES[solver]
    if nets is None:
        nets, _ = train_padnet(problem.spec, cfg, mode)
    solver_cfg = dataclasses.replace(cfg.padnet, mode=mode)
    x, trace = padnet_infer(
        _for_mode(problem, mode), nets, solver_cfg, init_state(problem.init, solver_cfg), gt
    )
    return x, trace, list(nets)


@dataclass
class SolverResult:
    status: str
    K: int
    final_recon_error: float | None = None
    final_psnr: float | None = None
    wall_time_ms: int = 0
    terminated_by: str | None = None
    trace: str | None = None
    reconstruction: str | None = None
    networks: str | None = None
    error: str | None = None


@dataclass
class ExperimentReport:
    config: dict
    observation_recon_error: float
    observation_psnr: float
    solvers: dict[str, SolverResult] = field(default_factory=dict)
    ground_truth_image: str | None = None
    observation_image: str | None = None

    def to_json(self) -> str:
        doc = {
            "config": self.config,
            "observation": {
                "recon_error": self.observation_recon_error,
                "psnr": self.observation_psnr,
                "ground_truth_image": self.ground_truth_image,
                "observation_image": self.observation_image,
            },
            "solvers": {name: dataclasses.asdict(r) for name, r in self.solvers.items()},
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        doc = json.loads(text)
        obs = doc["observation"]
        return cls(
            config=doc["config"],
            observation_recon_error=obs["recon_error"],
            observation_psnr=obs["psnr"],
            solvers={n: SolverResult(**r) for n, r in doc["solvers"].items()},
            ground_truth_image=obs["ground_truth_image"],
            observation_image=obs["observation_image"],
        )


def run_experiment(
    spec: ProblemSpec,
    solvers: Sequence[str],
    cfgs: Config,
    out_dir: str | os.PathLike,
    networks: dict[str, Sequence[BuiltInNetwork]] | None = None,
) -> ExperimentReport:
    """Run ``solvers`` on one instance and write traces, images and ``report.json``.

    ``networks`` optionally maps ``"epadnet"``/``"ipadnet"`` to pre-trained
    stage networks.  A diverging solver is recorded with ``status =
    "diverged"`` and the remaining solvers still run.
    """
    unknown = [s for s in solvers if s not in SOLVERS]
    if unknown:
        raise ValueError(f"unknown solver(s): {', '.join(unknown)}")
    os.makedirs(out_dir, exist_ok=True)
    networks = networks or {}
    cfgs = dataclasses.replace(cfgs, problem=spec)
    problem = make_problem(spec)
    x_img_obs = problem.observation
    report = ExperimentReport(
        config=cfgs.as_dict(),
        observation_recon_error=rel_error(problem.init, problem.ground_truth),
        observation_psnr=psnr(x_img_obs, problem.image_truth),
        ground_truth_image="ground_truth.pgm",
        observation_image="observation.pgm",
    )
    write_pgm(os.path.join(out_dir, "ground_truth.pgm"), problem.image_truth)
    write_pgm(os.path.join(out_dir, "observation.pgm"), x_img_obs)

    for name in solvers:
        t0 = time.perf_counter()
        try:
            g, trace, nets = solve(problem, name, cfgs, networks.get(name))
        except (SolverDivergence, TrainingDivergence) as exc:
            k = getattr(exc, "k", 0)
            report.solvers[name] = SolverResult(
                status="diverged",
                K=int(k),
                wall_time_ms=int(round(1000 * (time.perf_counter() - t0))),
                error=str(exc),
            )
            continue
        elapsed = int(round(1000 * (time.perf_counter() - t0)))
        image = problem.image(g)
        res = SolverResult(
            status="ok",
            K=trace.K,
            final_recon_error=rel_error(g, problem.ground_truth),
            final_psnr=psnr(image, problem.image_truth),
            wall_time_ms=elapsed,
            terminated_by=trace.terminated_by,
            trace=f"trace_{name}.csv",
            reconstruction=f"reconstruction_{name}.pgm",
        )
        trace.write_csv(os.path.join(out_dir, res.trace))
        write_pgm(os.path.join(out_dir, res.reconstruction), image)
        if nets is not None:
            res.networks = f"{name}.net"
            save_networks(os.path.join(out_dir, res.networks), nets)
        report.solvers[name] = res

    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    return report
