"""Proximal alternating direction network: inference and stage-wise learning.

Each outer iteration ``k`` runs

1. ``u = argmin f(u) + mu/2 ||u - x^k||^2 + rho_k/2 ||u - (v^k - lam^k)||^2``
2. ``v = N_{alpha_k}(u + lam^k)`` (built-in network)
3. explicit mode: ``x = prox_r(v - grad f_mu(v))``; implicit mode: ``x = v``
4. ``lam = lam^k + u - v``

with ``rho_k = gamma^k rho_0``, ``alpha_k = rho_k^(-1/2)`` and a constant
``mu``.  Iteration stops once ``||x^{k+1} - x^k|| / ||x^k|| <= epsilon`` or
``k >= k_max``; ``K`` is the index at which that test fired.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .energy import EnergyModel, MoreauParams, eval_energy, grad_fidelity, grad_moreau
from .network import BuiltInNetwork, TrainConfig, TrainingPair, network_apply, train_stage
from .tensor import NonFiniteError, rel_error

__all__ = [
    "EXPLICIT",
    "IMPLICIT",
    "SolverConfig",
    "SolverState",
    "IterationRecord",
    "Trace",
    "SolverDivergence",
    "ErrorConditionReport",
    "schedule",
    "init_state",
    "u_update",
    "error_correct",
    "compute_error_vector",
    "check_error_condition",
    "dual_update",
    "clip_deviation",
    "padnet_infer",
    "padnet_learn",
    "descent_margin",
    "cauchy_bound",
    "MonitorCheck",
    "replay_descent",
    "replay_cauchy",
    "TRACE_HEADER",
]

EXPLICIT = "explicit"
IMPLICIT = "implicit"

TRACE_HEADER = (
    "k", "energy", "iter_error", "recon_error", "err_lhs", "err_rhs",
    "cauchy_lhs", "cauchy_bound", "stages_used",
)


class SolverDivergence(FloatingPointError):
    def __init__(self, k: int, what: str = "state"):
        super().__init__(f"non-finite {what} at iteration k={k}")
        self.k = k


@dataclass(frozen=True)
class SolverConfig:
    """Schedule and stopping parameters.

    ``mu`` defaults to ``2.5 * c_e``.  With ``clip_network`` the network
    deviation ``||N(v) - v||`` is radially clipped to ``c_n * alpha_k`` in
    both modes, so the architecture condition holds by construction.
    """

    rho0: float = 1.0
    gamma: float = 2.0
    c_e: float = 1.0
    mu: float | None = None
    c_n: float = 10.0
    epsilon: float = 1e-3
    k_max: int = 30
    t_max: int = 3
    mode: str = EXPLICIT
    clip_network: bool = True

    def __post_init__(self):
        if self.mu is None:
            object.__setattr__(self, "mu", 2.5 * self.c_e)
        if not self.rho0 > 0:
            raise ValueError("rho0 must be positive")
        if not self.gamma > 1:
            raise ValueError("gamma must exceed 1")
        if not self.c_e > 0:
            raise ValueError("c_e must be positive")
        if not self.mu > 2 * self.c_e:
            raise ValueError("mu must exceed 2*c_e")
        if not self.c_n > 0:
            raise ValueError("c_n must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")
        if self.t_max < 0:
            raise ValueError("t_max must be nonnegative")
        if self.mode not in (EXPLICIT, IMPLICIT):
            raise ValueError(f"mode must be {EXPLICIT!r} or {IMPLICIT!r}")


def schedule(cfg: SolverConfig, k: int) -> tuple[float, float, float]:
    """``(rho_k, alpha_k, mu_k)`` for outer iteration ``k``."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    rho = cfg.gamma**k * cfg.rho0
    return rho, math.sqrt(1.0 / rho), cfg.mu


@dataclass
class SolverState:
    u: np.ndarray
    v: np.ndarray
    x: np.ndarray
    lambda_dual: np.ndarray
    k: int = 0
    rho_k: float = 1.0
    alpha_k: float = 1.0
    mu_k: float = 2.5


def init_state(x0, cfg: SolverConfig | None = None, lambda0=None) -> SolverState:
    """State with ``u = v = x = x0`` and a zero (or given) dual variable."""
    cfg = cfg or SolverConfig()
    x0 = np.array(x0, dtype=np.float64)
    lam = np.zeros_like(x0) if lambda0 is None else np.array(lambda0, dtype=np.float64)
    rho, alpha, mu = schedule(cfg, 0)
    return SolverState(x0.copy(), x0.copy(), x0.copy(), lam, 0, rho, alpha, mu)


@dataclass
class IterationRecord:
    k: int
    energy: float
    iter_error: float
    recon_error: float | None = None
    err_lhs: float | None = None
    err_rhs: float | None = None
    cauchy_lhs: float | None = None
    cauchy_bound: float | None = None
    stages_used: int = 0
    # not exported to CSV
    verified: bool = True
    step_norm: float = 0.0
    grad_norm: float = 0.0
    lambda_norm: float = 0.0
    primal_residual: float = 0.0
    u_recon_error: float | None = None


def _fmt(val) -> str:
    if val is None:
        return ""
    if isinstance(val, (int, np.integer)) and not isinstance(val, bool):
        return str(int(val))
    return "%.17g" % float(val)


@dataclass
class Trace:
    records: list[IterationRecord] = field(default_factory=list)
    terminated_by: str = "k_max"
    initial_energy: float = float("nan")
    initial_norm: float = 0.0
    solver: str = ""

    @property
    def K(self) -> int:
        return self.records[-1].k if self.records else 0

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.records]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(TRACE_HEADER) + "\n")
        for r in self.records:
            buf.write(",".join(_fmt(getattr(r, c)) for c in TRACE_HEADER) + "\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "Trace":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(rows[0]) != TRACE_HEADER:
            raise ValueError("unexpected trace header")
        recs = []
        for row in rows[1:]:
            vals = {c: (None if s == "" else float(s)) for c, s in zip(TRACE_HEADER, row)}
            vals["k"] = int(vals["k"])
            vals["stages_used"] = int(vals["stages_used"])
            recs.append(IterationRecord(**vals))
        return cls(recs)


@dataclass(frozen=True)
class ErrorConditionReport:
    passed: bool
    lhs: float
    rhs: float


def _moreau(state: SolverState) -> MoreauParams:
    return MoreauParams(state.mu_k, state.x)


def u_update(state: SolverState, model: EnergyModel) -> np.ndarray:
    """Exact minimizer of the Moreau-regularized fidelity plus the coupling term."""
    c = state.mu_k + state.rho_k
    assert c > 0
    w = (state.mu_k * state.x + state.rho_k * (state.v - state.lambda_dual)) / c
    return model.fidelity.prox(w, c)


def error_correct(state: SolverState, model: EnergyModel, v_new) -> np.ndarray:
    """``prox_r(v - grad f_mu(v))`` anchored at the current ``x``."""
    z = v_new - grad_moreau(model.fidelity, _moreau(state), v_new)
    return model.prior.prox(z)


def compute_error_vector(state: SolverState, model: EnergyModel, x_new, v_new) -> np.ndarray:
    """``(mu - 1)(x - v) - grad f(v) + grad f(x)`` with the raw fidelity gradient."""
    fid = model.fidelity
    return (
        (state.mu_k - 1.0) * (x_new - v_new)
        - grad_fidelity(fid, v_new)
        + grad_fidelity(fid, x_new)
    )


def check_error_condition(e, x_new, x_old, c_e: float) -> ErrorConditionReport:
    lhs = float(np.linalg.norm(e))
    rhs = c_e * float(np.linalg.norm(np.asarray(x_new) - np.asarray(x_old)))
    return ErrorConditionReport(lhs <= rhs, lhs, rhs)


def dual_update(lambda_dual, u_new, v_new) -> np.ndarray:
    return lambda_dual + (u_new - v_new)


def clip_deviation(v_in, v_out, bound: float) -> np.ndarray:
    """Shrink ``v_out - v_in`` radially so its norm is at most ``bound``."""
    d = v_out - v_in
    n = float(np.linalg.norm(d))
    if n <= bound:
        return v_out
    return v_in + d * (bound / n)


def descent_margin(mu: float, c_e: float) -> float:
    """Guaranteed per-step energy decrease factor ``mu/4 - c_e^2/mu``."""
    return mu / 4.0 - c_e**2 / mu


def cauchy_bound(k: int, cfg: SolverConfig, m: float) -> float:
    """``(C_N + M / sqrt(rho_0)) / sqrt(rho_k)`` bounding ``||v^{k+1} - v^k||``."""
    rho_k, alpha_k, _ = schedule(cfg, k)
    return (cfg.c_n + m * math.sqrt(1.0 / cfg.rho0)) * alpha_k


@dataclass(frozen=True)
class MonitorCheck:
    """One replayed inequality ``lhs >= rhs`` (descent) or ``lhs <= rhs`` (bounds)."""

    k: int
    lhs: float
    rhs: float
    passed: bool


def replay_descent(trace: Trace, cfg: SolverConfig, slack: float = 1e-9) -> list[MonitorCheck]:
    """Check the sufficient-decrease inequality on every verified iteration.

    ``F(x^k) - F(x^{k+1}) >= (mu/4 - C_E^2/mu) ||x^{k+1} - x^k||^2 - slack |F(x^k)|``
    with ``F(x^0)`` taken from ``trace.initial_energy``.  Iterations whose
    error condition failed are skipped.
    """
    margin = descent_margin(cfg.mu, cfg.c_e)
    out = []
    prev = trace.initial_energy
    for rec in trace.records:
        if rec.verified:
            lhs = prev - rec.energy
            rhs = margin * rec.step_norm**2 - slack * abs(prev)
            out.append(MonitorCheck(rec.k, lhs, rhs, bool(lhs >= rhs)))
        prev = rec.energy
    return out


def replay_cauchy(
    trace: Trace, cfg: SolverConfig, rtol: float = 1e-12
) -> tuple[list[MonitorCheck], list[MonitorCheck]]:
    """Replay the step bound on ``v`` and the dual bound on ``lambda``.

    ``M`` is the largest Moreau-gradient norm recorded anywhere in the run.
    ``rtol`` absorbs rounding when the clipped network sits exactly on its
    deviation budget.  Returns ``(step_checks, dual_checks)``.
    """
    m = max((r.grad_norm for r in trace.records), default=0.0)
    steps, duals = [], []
    for rec in trace.records:
        bound = cauchy_bound(rec.k, cfg, m)
        steps.append(MonitorCheck(rec.k, rec.cauchy_lhs, bound, bool(rec.cauchy_lhs <= bound * (1 + rtol))))
        _, alpha, _ = schedule(cfg, rec.k)
        dual = cfg.c_n * alpha
        duals.append(MonitorCheck(rec.k, rec.lambda_norm, dual, bool(rec.lambda_norm <= dual * (1 + rtol))))
    return steps, duals


def _energy(model, x):
    return float("nan") if model.prior.is_implicit else eval_energy(model, x)


def _propagate(net: BuiltInNetwork | None, v_tilde, alpha, cfg: SolverConfig):
    v = v_tilde.copy() if net is None else network_apply(net, v_tilde, alpha)
    if cfg.clip_network:
        v = clip_deviation(v_tilde, v, cfg.c_n * alpha)
    return v


def _stop(x_new, x_old, k, cfg) -> str | None:
    if rel_error(x_new, x_old) <= cfg.epsilon:
        return "epsilon"
    if k >= cfg.k_max:
        return "k_max"
    return None


def padnet_infer(
    model: EnergyModel,
    net_per_stage: Sequence[BuiltInNetwork],
    cfg: SolverConfig,
    init: SolverState,
    ground_truth=None,
) -> tuple[np.ndarray, Trace]:
    """Run the four-step iteration with pre-trained per-stage networks.

    ``net_per_stage[k]`` drives iteration ``k``; the last network is reused
    once the list is exhausted (an empty list means identity propagation).
    Non-finite values anywhere in an iteration raise :class:`SolverDivergence`.
    """
    explicit = cfg.mode == EXPLICIT
    if explicit and model.prior.is_implicit:
        raise ValueError("explicit mode needs an explicit prior")
    trace = Trace(solver="epadnet" if explicit else "ipadnet")
    try:
        return _infer(model, net_per_stage, cfg, init, ground_truth, trace)
    except NonFiniteError as exc:
        k = trace.records[-1].k + 1 if trace.records else 0
        raise SolverDivergence(k) from exc


def _infer(
    model: EnergyModel,
    net_per_stage: Sequence[BuiltInNetwork],
    cfg: SolverConfig,
    init: SolverState,
    ground_truth,
    trace: Trace,
) -> tuple[np.ndarray, Trace]:
    explicit = cfg.mode == EXPLICIT
    st = replace(init)
    trace.initial_energy = _energy(model, st.x) if explicit else float("nan")
    trace.initial_norm = float(np.linalg.norm(st.x))
    m_obs = 0.0
    k = 0
    while True:
        rho, alpha, mu = schedule(cfg, k)
        st.rho_k, st.alpha_k, st.mu_k, st.k = rho, alpha, mu, k
        u_new = u_update(st, model)
        gnorm = float(np.linalg.norm(grad_moreau(model.fidelity, _moreau(st), u_new)))
        m_obs = max(m_obs, gnorm)
        net = net_per_stage[min(k, len(net_per_stage) - 1)] if net_per_stage else None
        v_new = _propagate(net, u_new + st.lambda_dual, alpha, cfg)
        rec = IterationRecord(k=k, energy=float("nan"), iter_error=0.0,
                              stages_used=len(net.units) - 1 if net else 0)
        if explicit:
            x_new = error_correct(st, model, v_new)
            e = compute_error_vector(st, model, x_new, v_new)
            cond = check_error_condition(e, x_new, st.x, cfg.c_e)
            rec.err_lhs, rec.err_rhs, rec.verified = cond.lhs, cond.rhs, cond.passed
            rec.energy = eval_energy(model, x_new)
        else:
            x_new = v_new
        lam_new = dual_update(st.lambda_dual, u_new, v_new)
        if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(lam_new))):
            raise SolverDivergence(k)
        rec.iter_error = rel_error(x_new, st.x)
        rec.step_norm = float(np.linalg.norm(x_new - st.x))
        rec.cauchy_lhs = float(np.linalg.norm(v_new - st.v))
        rec.cauchy_bound = cauchy_bound(k, cfg, m_obs)
        rec.grad_norm = gnorm
        rec.lambda_norm = float(np.linalg.norm(lam_new))
        if ground_truth is not None:
            rec.recon_error = rel_error(x_new, ground_truth)
            rec.u_recon_error = rel_error(u_new, ground_truth)
        trace.records.append(rec)
        stop = _stop(x_new, st.x, k, cfg)
        st = SolverState(u_new, v_new, x_new, lam_new, k + 1, rho, alpha, mu)
        if stop:
            trace.terminated_by = stop
            return x_new, trace
        k += 1


def _rss(vals) -> float:
    return float(math.sqrt(sum(v * v for v in vals)))


def padnet_learn(
    model: EnergyModel | Sequence[EnergyModel],
    data: Sequence[TrainingPair],
    cfg: SolverConfig,
    tcfg: TrainConfig,
) -> tuple[list[BuiltInNetwork], Trace]:
    """Design and train per-stage networks while iterating on training instances.

    ``data[i].input`` is the initial iterate of instance ``i`` and
    ``data[i].target`` its ground truth; ``model`` is either one energy shared
    by all instances or a sequence aligned with ``data``.  For every outer
    iteration, units are appended and trained one at a time until the error
    condition holds on every instance (explicit mode) or ``t_max`` is reached.
    Trace norms are root-sum-squares over instances and energies are sums.
    """
    if not data:
        raise ValueError("training data is empty")
    models = [model] * len(data) if isinstance(model, EnergyModel) else list(model)
    if len(models) != len(data):
        raise ValueError("need one energy model per training pair")
    explicit = cfg.mode == EXPLICIT
    if explicit and any(m.prior.is_implicit for m in models):
        raise ValueError("explicit mode needs an explicit prior")
    trace = Trace(solver="epadnet" if explicit else "ipadnet")
    try:
        return _learn(models, data, cfg, tcfg, trace)
    except NonFiniteError as exc:
        k = trace.records[-1].k + 1 if trace.records else 0
        raise SolverDivergence(k) from exc


def _learn(models, data, cfg, tcfg, trace):
    explicit = cfg.mode == EXPLICIT
    states = [init_state(p.input, cfg) for p in data]
    targets = [np.asarray(p.target, dtype=np.float64) for p in data]
    if explicit:
        trace.initial_energy = sum(eval_energy(m, s.x) for m, s in zip(models, states))
    trace.initial_norm = _rss([np.linalg.norm(s.x) for s in states])
    nets: list[BuiltInNetwork] = []
    m_obs = 0.0
    k = 0
    while True:
        rho, alpha, mu = schedule(cfg, k)
        us, vts, gnorms = [], [], []
        for m, st in zip(models, states):
            st.rho_k, st.alpha_k, st.mu_k, st.k = rho, alpha, mu, k
            u = u_update(st, m)
            us.append(u)
            vts.append(u + st.lambda_dual)
            gnorms.append(np.linalg.norm(grad_moreau(m.fidelity, _moreau(st), u)))
        gnorm = _rss(gnorms)
        m_obs = max(m_obs, gnorm)

        pairs = [TrainingPair(vt, tg) for vt, tg in zip(vts, targets)]
        net = BuiltInNetwork([], alpha)
        t = 0
        while True:
            rng = np.random.default_rng([tcfg.seed, k, t])
            net = train_stage(net, t, pairs, tcfg, rng=rng)
            vs = [_propagate(net, vt, alpha, cfg) for vt in vts]
            if explicit:
                xs = [error_correct(st, m, v) for st, m, v in zip(states, models, vs)]
                conds = [
                    check_error_condition(compute_error_vector(st, m, x, v), x, st.x, cfg.c_e)
                    for st, m, x, v in zip(states, models, xs, vs)
                ]
                passed = all(c.passed for c in conds)
            else:
                xs, conds, passed = vs, [], False
            if passed or t >= cfg.t_max:
                break
            t += 1
        nets.append(net)

        rec = IterationRecord(k=k, energy=float("nan"), iter_error=0.0, stages_used=t)
        if explicit:
            rec.energy = sum(eval_energy(m, x) for m, x in zip(models, xs))
            rec.err_lhs = _rss([c.lhs for c in conds])
            rec.err_rhs = _rss([c.rhs for c in conds])
            rec.verified = passed
        lams = [dual_update(st.lambda_dual, u, v) for st, u, v in zip(states, us, vs)]
        if not all(np.all(np.isfinite(x)) for x in xs):
            raise SolverDivergence(k)
        step = _rss([np.linalg.norm(x - st.x) for x, st in zip(xs, states)])
        prev = _rss([np.linalg.norm(st.x) for st in states])
        rec.step_norm = step
        rec.iter_error = step / prev if prev > 0 else step
        rec.cauchy_lhs = _rss([np.linalg.norm(v - st.v) for v, st in zip(vs, states)])
        rec.cauchy_bound = cauchy_bound(k, cfg, m_obs)
        rec.grad_norm = gnorm
        rec.lambda_norm = _rss([np.linalg.norm(lam) for lam in lams])
        err = _rss([np.linalg.norm(x - tg) for x, tg in zip(xs, targets)])
        ref = _rss([np.linalg.norm(tg) for tg in targets])
        rec.recon_error = err / ref if ref > 0 else err
        trace.records.append(rec)

        states = [
            SolverState(u, v, x, lam, k + 1, rho, alpha, mu)
            for u, v, x, lam in zip(us, vs, xs, lams)
        ]
        stop = "epsilon" if rec.iter_error <= cfg.epsilon else ("k_max" if k >= cfg.k_max else None)
        if stop:
            trace.terminated_by = stop
            return nets, trace
        k += 1
