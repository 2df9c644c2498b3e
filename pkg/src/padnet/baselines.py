"""Classical splitting baselines on the same energies: ADMM and HQS."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import EnergyModel, eval_energy
from .solver import IterationRecord, SolverDivergence, SolverState, Trace
from .tensor import NonFiniteError, rel_error

__all__ = ["BaselineConfig", "admm_solve", "hqs_solve", "HQS_BETA_CAP"]

HQS_BETA_CAP = 1e8


@dataclass(frozen=True)
class BaselineConfig:
    """``gamma`` grows the penalty each step (1 keeps it fixed)."""

    rho0: float = 1.0
    gamma: float = 1.0
    epsilon: float = 1e-3
    k_max: int = 200
    hqs_gamma: float = 2.0

    def __post_init__(self):
        if not self.rho0 > 0:
            raise ValueError("rho0 must be positive")
        if not self.gamma >= 1:
            raise ValueError("gamma must be at least 1")
        if not self.hqs_gamma >= 1:
            raise ValueError("hqs_gamma must be at least 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")


def _check(model: EnergyModel):
    if model.prior.is_implicit:
        raise ValueError("baselines need an explicit prior")


def _record(trace, model, k, x_new, x_old, ground_truth):
    rec = IterationRecord(
        k=k,
        energy=eval_energy(model, x_new),
        iter_error=rel_error(x_new, x_old),
        step_norm=float(np.linalg.norm(x_new - x_old)),
    )
    if ground_truth is not None:
        rec.recon_error = rel_error(x_new, ground_truth)
    trace.records.append(rec)
    return rec


def admm_solve(
    model: EnergyModel, cfg: BaselineConfig, init: SolverState, ground_truth=None
) -> tuple[np.ndarray, Trace]:
    """Plain ADMM on ``f(u) + r(v)`` s.t. ``u = v``; the reported iterate is ``v``."""
    _check(model)
    u, v, lam = init.u.copy(), init.v.copy(), init.lambda_dual.copy()
    trace = Trace(solver="admm", initial_energy=eval_energy(model, v))
    trace.initial_norm = float(np.linalg.norm(v))
    rho = cfg.rho0
    k = 0
    while True:
        try:
            u = model.fidelity.prox(v - lam, rho)
            v_new = model.prior.prox(u + lam, 1.0 / rho)
        except NonFiniteError as exc:
            raise SolverDivergence(k) from exc
        lam = lam + (u - v_new)
        if not (np.all(np.isfinite(v_new)) and np.all(np.isfinite(lam))):
            raise SolverDivergence(k)
        rec = _record(trace, model, k, v_new, v, ground_truth)
        rec.primal_residual = float(np.linalg.norm(u - v_new))
        v = v_new
        if rec.iter_error <= cfg.epsilon or k >= cfg.k_max:
            trace.terminated_by = "epsilon" if rec.iter_error <= cfg.epsilon else "k_max"
            return v, trace
        rho *= cfg.gamma
        k += 1


def hqs_solve(
    model: EnergyModel, cfg: BaselineConfig, init: SolverState, ground_truth=None
) -> tuple[np.ndarray, Trace]:
    """Half-quadratic splitting with ``beta`` growing by ``hqs_gamma`` up to 1e8.

    Alternates ``x = argmin f(x) + beta/2 ||x - z||^2`` and
    ``z = prox_{r/beta}(x)``; the reported iterate is ``z``.
    """
    _check(model)
    z = init.x.copy()
    trace = Trace(solver="hqs", initial_energy=eval_energy(model, z))
    trace.initial_norm = float(np.linalg.norm(z))
    beta = cfg.rho0
    k = 0
    while True:
        try:
            x = model.fidelity.prox(z, beta)
            z_new = model.prior.prox(x, 1.0 / beta)
        except NonFiniteError as exc:
            raise SolverDivergence(k) from exc
        if not np.all(np.isfinite(z_new)):
            raise SolverDivergence(k)
        rec = _record(trace, model, k, z_new, z, ground_truth)
        rec.primal_residual = float(np.linalg.norm(x - z_new))
        z = z_new
        if rec.iter_error <= cfg.epsilon or k >= cfg.k_max:
            trace.terminated_by = "epsilon" if rec.iter_error <= cfg.epsilon else "k_max"
            return z, trace
        beta = min(beta * cfg.hqs_gamma, HQS_BETA_CAP)
        k += 1
