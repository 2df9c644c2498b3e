"""Energy models ``F(x) = f(x; y) + r(x)``, Moreau-regularized gradients and priors.

Priors are separable and act elementwise.  Scalar proximal maps here solve

    prox(y) = argmin_x  1/2 (x - y)^2 + w |x|^p

with ``|x|^0`` read as the indicator of ``x != 0``.  They accept scalars or
arrays; ``oracle_prox_grid`` is an independent brute-force minimizer used to
verify them.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.optimize import minimize_scalar

from .tensor import (
    Kernel,
    ShapeError,
    adjoint_conv2_circ,
    as_grid,
    conv2_circ,
    gradient_filters,
    grad_adjoint,
    grad_op,
    solve_diag_freq,
)

__all__ = [
    "ImplicitPriorError",
    "EnergyNotEvaluable",
    "ProxIntractable",
    "ProxConvergenceWarning",
    "Prior",
    "ConvQuadratic",
    "CoupledImage",
    "Quadratic",
    "Fidelity",
    "EnergyModel",
    "MoreauParams",
    "eval_energy",
    "grad_fidelity",
    "grad_moreau",
    "prox_l1",
    "prox_l0",
    "prox_lp_gst",
    "gst_threshold",
    "prox_prior",
    "prox_objective",
    "oracle_prox_grid",
    "image_from_gradients",
    "GST_ITERATIONS",
]

GST_ITERATIONS = 20
_GST_STATIONARY_TOL = 1e-10


class ImplicitPriorError(ValueError):
    """Operation needs an explicit prior but the model's prior is implicit."""


class EnergyNotEvaluable(ImplicitPriorError):
    pass


class ProxIntractable(ImplicitPriorError):
    pass


class ProxConvergenceWarning(RuntimeWarning):
    """The generalized soft-thresholding inner loop had not settled after J steps."""


# ---------------------------------------------------------------------------
# scalar / elementwise proximal maps


def prox_l1(y, w):
    """Soft thresholding ``sign(y) max(|y| - w, 0)``."""
    return np.sign(y) * np.maximum(np.abs(y) - w, 0.0)


def prox_l0(y, w):
    """Hard thresholding at ``sqrt(2 w)``; the tie ``|y| = sqrt(2 w)`` maps to 0."""
    y = np.asarray(y, dtype=np.float64)
    out = np.where(np.abs(y) > np.sqrt(2.0 * w), y, 0.0)
    return out[()] if out.ndim == 0 else out


def gst_threshold(w, p: float):
    """Threshold below which the l_p proximal map is exactly zero."""
    base = 2.0 * w * (1.0 - p)
    return base ** (1.0 / (2.0 - p)) + w * p * base ** ((p - 1.0) / (2.0 - p))


def prox_lp_gst(y, w, p: float, iterations: int = GST_ITERATIONS):
    """Generalized soft thresholding for ``0 < p < 1``.

    Zero below :func:`gst_threshold`; above it the nonzero root of
    ``x + w p x^(p-1) = |y|`` is found by the fixed-point iteration
    ``x <- |y| - w p x^(p-1)`` started at ``x = |y|``.  A
    :class:`ProxConvergenceWarning` is emitted if the last step still moved
    any entry by more than 1e-10.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    y = np.asarray(y, dtype=np.float64)
    w = np.broadcast_to(np.asarray(w, dtype=np.float64), y.shape)
    mag = np.abs(y)
    active = mag > gst_threshold(w, p)
    out = np.zeros_like(y)
    if np.any(active):
        a = mag[active]
        wa = w[active]
        x = a.copy()
        change = np.zeros_like(a)
        for _ in range(iterations):
            nxt = a - wa * p * x ** (p - 1.0)
            change = np.abs(nxt - x)
            x = nxt
        if change.max() > _GST_STATIONARY_TOL:
            warnings.warn(
                f"GST fixed point not settled after {iterations} steps "
                f"(last change {change.max():.2e})",
                ProxConvergenceWarning,
                stacklevel=2,
            )
        out[active] = np.sign(y[active]) * x
    return out[()] if out.ndim == 0 else out


def prox_objective(x, y, w, p: float):
    """``1/2 (x - y)^2 + w |x|^p`` with ``|x|^0 = [x != 0]``."""
    x = np.asarray(x, dtype=np.float64)
    if p == 0:
        pen = (x != 0).astype(np.float64)
    else:
        pen = np.abs(x) ** p
    return 0.5 * (x - y) ** 2 + w * pen


def oracle_prox_grid(y: float, w: float, p: float, step: float = 1e-4) -> float:
    """Brute-force scalar prox: dense grid search, then bounded local refinement."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    y = float(y)
    if y == 0.0:
        return 0.0
    half = abs(y) + 1.0
    grid = np.arange(-half, half + step, step)
    vals = prox_objective(grid, y, w, p)
    i = int(np.argmin(vals))
    best_x, best_v = float(grid[i]), float(vals[i])

    lo, hi = best_x - step, best_x + step
    if lo < 0.0 < hi:
        # keep the refinement on one side of the kink at zero
        lo, hi = (0.0, hi) if best_x >= 0 else (lo, 0.0)
    res = minimize_scalar(
        lambda t: float(prox_objective(t, y, w, p)),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-13},
    )
    candidates = [(best_v, best_x), (float(res.fun), float(res.x))]
    candidates.append((float(prox_objective(0.0, y, w, p)), 0.0))
    return min(candidates)[1]


# ---------------------------------------------------------------------------
# priors


@dataclass(frozen=True)
class Prior:
    """Separable prior ``weight * sum |x_i|^p``.

    ``kind`` is one of ``"l0"``, ``"l1"``, ``"lp"`` (with ``0 < p < 1``) or
    ``"implicit"`` (no evaluable value and no proximal map).
    """

    kind: str
    weight: float = 1.0
    p: float | None = None

    def __post_init__(self):
        if self.kind not in ("l0", "l1", "lp", "implicit"):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.kind != "implicit" and not self.weight > 0:
            raise ValueError("prior weight must be positive")
        if self.kind == "lp":
            if self.p is None or not 0.0 < self.p < 1.0:
                raise ValueError(f"lp prior requires 0 < p < 1, got {self.p}")
        elif self.kind == "l0":
            object.__setattr__(self, "p", 0.0)
        elif self.kind == "l1":
            object.__setattr__(self, "p", 1.0)

    @classmethod
    def from_p(cls, p: float, weight: float) -> "Prior":
        if p == 0:
            return cls("l0", weight)
        if p == 1:
            return cls("l1", weight)
        return cls("lp", weight, p)

    @classmethod
    def implicit(cls) -> "Prior":
        return cls("implicit")

    @property
    def is_implicit(self) -> bool:
        return self.kind == "implicit"

    def value(self, x) -> float:
        if self.is_implicit:
            raise EnergyNotEvaluable("energy not evaluable: the prior is implicit")
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "l0":
            s = np.count_nonzero(x)
        elif self.kind == "l1":
            s = np.abs(x).sum()
        else:
            s = (np.abs(x) ** self.p).sum()
        return self.weight * float(s)

    def prox(self, y, step: float = 1.0) -> np.ndarray:
        """Elementwise ``argmin_x step * r(x) + 1/2 ||x - y||^2``."""
        if self.is_implicit:
            raise ProxIntractable("prox intractable for implicit prior")
        w = self.weight * step
        if self.kind == "l1":
            return prox_l1(np.asarray(y, dtype=np.float64), w)
        if self.kind == "l0":
            return prox_l0(y, w)
        return prox_lp_gst(y, w, self.p)


def prox_prior(prior: Prior, y, step: float = 1.0) -> np.ndarray:
    return prior.prox(y, step)


# ---------------------------------------------------------------------------
# fidelities


def image_from_gradients(y, k: Kernel, g, beta: float) -> np.ndarray:
    """Image minimizing ``||k * x - y||^2 + beta ||D(x) - g||^2``.

    Solves ``(K^T K + beta D^T D) x = K^T y + beta D^T g`` in the frequency
    domain; ``g`` stacks the horizontal and vertical gradient channels.
    """
    y = as_grid(y, "y")
    g = as_grid(g, "g")
    if g.shape != (2,) + y.shape:
        raise ShapeError(f"gradient stack {g.shape} does not match image {y.shape}")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    dx, dy = gradient_filters()
    rhs = adjoint_conv2_circ(y, k)
    terms = [(k, 1.0)]
    if beta > 0:
        rhs = rhs + beta * grad_adjoint(g)
        terms += [(dx, beta), (dy, beta)]
    return solve_diag_freq(terms, rhs, 0.0)


@dataclass(frozen=True, eq=False)
class ConvQuadratic:
    """``f(x) = 1/2 ||k * x - b||^2``."""

    kernel: Kernel
    observation: np.ndarray

    @property
    def shape(self):
        return np.shape(self.observation)

    def value(self, x) -> float:
        r = conv2_circ(x, self.kernel) - self.observation
        return 0.5 * float(np.sum(r * r))

    def grad(self, x) -> np.ndarray:
        return adjoint_conv2_circ(conv2_circ(x, self.kernel) - self.observation, self.kernel)

    def prox(self, w, c: float) -> np.ndarray:
        """``argmin_u f(u) + c/2 ||u - w||^2``."""
        rhs = adjoint_conv2_circ(self.observation, self.kernel) + c * np.asarray(w)
        return solve_diag_freq([(self.kernel, 1.0)], rhs, c)


@dataclass(frozen=True, eq=False)
class CoupledImage:
    """Gradient-domain fidelity with the image eliminated.

    ``f(g) = 1/2 min_x ||k * x - y||^2 + beta ||D(x) - g||^2``; the variable
    ``g`` has shape ``(2, rows, cols)`` while ``observation`` is the image.
    """

    kernel: Kernel
    observation: np.ndarray
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @property
    def shape(self):
        return (2,) + tuple(np.shape(self.observation))

    def image(self, g) -> np.ndarray:
        return image_from_gradients(self.observation, self.kernel, g, self.beta)

    def value(self, g) -> float:
        x = self.image(g)
        r1 = conv2_circ(x, self.kernel) - self.observation
        r2 = grad_op(x) - g
        return 0.5 * float(np.sum(r1 * r1) + self.beta * np.sum(r2 * r2))

    def grad(self, g) -> np.ndarray:
        g = as_grid(g, "g")
        return self.beta * (g - grad_op(self.image(g)))

    def prox(self, w, c: float) -> np.ndarray:
        w = as_grid(w, "w")
        b_eff = self.beta * c / (self.beta + c)
        x = image_from_gradients(self.observation, self.kernel, w, b_eff)
        return (self.beta * grad_op(x) + c * w) / (self.beta + c)


@dataclass(frozen=True, eq=False)
class Quadratic:
    """``f(x) = 1/2 ||x - anchor||^2``."""

    anchor: np.ndarray

    @property
    def shape(self):
        return np.shape(self.anchor)

    def value(self, x) -> float:
        r = np.asarray(x) - self.anchor
        return 0.5 * float(np.sum(r * r))

    def grad(self, x) -> np.ndarray:
        return as_grid(x, "x") - self.anchor

    def prox(self, w, c: float) -> np.ndarray:
        return (self.anchor + c * np.asarray(w, dtype=np.float64)) / (1.0 + c)


Fidelity = Union[ConvQuadratic, CoupledImage, Quadratic]


@dataclass(frozen=True, eq=False)
class EnergyModel:
    fidelity: Fidelity
    prior: Prior = field(default_factory=Prior.implicit)

    @property
    def shape(self):
        return self.fidelity.shape

    def with_prior(self, prior: Prior) -> "EnergyModel":
        return EnergyModel(self.fidelity, prior)


@dataclass(frozen=True, eq=False)
class MoreauParams:
    mu: float
    anchor: np.ndarray

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")


def _check_shape(fid, u):
    if tuple(np.shape(u)) != tuple(fid.shape):
        raise ShapeError(f"grid shape {np.shape(u)} does not match fidelity shape {fid.shape}")


def eval_energy(model: EnergyModel, x) -> float:
    """``f(x; y) + r(x)``; raises :class:`EnergyNotEvaluable` for implicit priors."""
    _check_shape(model.fidelity, x)
    if model.prior.is_implicit:
        raise EnergyNotEvaluable("energy not evaluable: the prior is implicit")
    return model.fidelity.value(x) + model.prior.value(x)


def grad_fidelity(fid: Fidelity, u) -> np.ndarray:
    _check_shape(fid, u)
    return fid.grad(u)


def grad_moreau(fid: Fidelity, mp: MoreauParams, u) -> np.ndarray:
    """Gradient of ``f(u) + mu/2 ||u - anchor||^2``."""
    _check_shape(fid, u)
    if np.shape(mp.anchor) != np.shape(u):
        raise ShapeError(f"anchor shape {np.shape(mp.anchor)} does not match {np.shape(u)}")
    return fid.grad(u) + mp.mu * (np.asarray(u) - mp.anchor)
