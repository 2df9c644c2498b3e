"""Built-in residual networks ``v_{t+1} = v_t - alpha * G_t(v_t)``.

A network is an ordered stack of direction units.  Three unit kinds exist:

``ConvRbf``
    ``G(v) = sum_i f_out_i * phi_i(f_in_i * v)`` with a Gaussian radial-basis
    nonlinearity ``phi_i(z) = sum_j w_ij exp(-(z/s - c_j)^2 / (2 sigma^2))``.
``LinearDiffusion``
    ``G(v) = gain * K^T K v``.
``SmoothedPrioxGrad``
    ``G(v) = weight * p * v * (v^2 + eps)^((p - 2)/2)``, the gradient of a
    smoothed ``weight * |v|^p``.

Units act on the last two axes of a grid and broadcast over leading axes.
Training is greedy: a fresh unit is appended to a frozen prefix and only its
parameters are fitted.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .tensor import Kernel, adjoint_conv2_circ, as_grid, conv2_circ

__all__ = [
    "ConvRbf",
    "LinearDiffusion",
    "SmoothedPrioxGrad",
    "BuiltInNetwork",
    "TrainConfig",
    "TrainingPair",
    "ArchitectureReport",
    "TrainingDivergence",
    "unit_apply",
    "network_apply",
    "check_architecture_condition",
    "unit_param_grad",
    "stage_loss",
    "train_stage",
    "fit_linear",
    "new_unit",
    "dump_networks",
    "load_networks",
    "save_networks",
    "read_networks",
    "FORMAT_VERSION",
]

MAGIC = b"PADN"
FORMAT_VERSION = 1


class TrainingDivergence(FloatingPointError):
    """Stage training produced a non-finite loss."""


def _otf(taps: np.ndarray, shape) -> np.ndarray:
    """Transfer functions for a stack of odd-sized filters ``(F, h, w)``."""
    f, h, w = taps.shape
    rows, cols = shape
    pad = np.zeros((f, rows, cols))
    pad[:, :h, :w] = taps
    pad = np.roll(pad, (-(h // 2), -(w // 2)), axis=(1, 2))
    return np.fft.fft2(pad)


def _extract_taps(full: np.ndarray, h: int, w: int) -> np.ndarray:
    """Pull the (h, w) window centred on offset (0, 0) out of periodic grids."""
    rows = (np.arange(h) - h // 2) % full.shape[-2]
    cols = (np.arange(w) - w // 2) % full.shape[-1]
    return full[..., rows[:, None], cols[None, :]]


def _bcast(otf: np.ndarray, ndim: int) -> np.ndarray:
    # (F, H, W) -> (F, 1, ..., 1, H, W) with ``ndim`` axes in total
    return otf.reshape(otf.shape[:1] + (1,) * (ndim - 3) + otf.shape[1:])


@dataclass(eq=False)
class ConvRbf:
    filters_in: np.ndarray
    filters_out: np.ndarray
    rbf_weights: np.ndarray
    rbf_centers: np.ndarray
    rbf_sigma: float
    input_scale: float = 1.0

    kind = "conv_rbf"
    tag = 1

    def __post_init__(self):
        self.filters_in = np.array(self.filters_in, dtype=np.float64)
        self.filters_out = np.array(self.filters_out, dtype=np.float64)
        self.rbf_centers = np.array(self.rbf_centers, dtype=np.float64).reshape(-1)
        self.rbf_weights = np.array(self.rbf_weights, dtype=np.float64)
        if self.filters_in.ndim != 3 or self.filters_in.shape != self.filters_out.shape:
            raise ValueError("filters_in and filters_out must be equal-sized (F, h, w) stacks")
        f, h, w = self.filters_in.shape
        if h % 2 == 0 or w % 2 == 0:
            raise ValueError("filter support must be odd")
        if self.rbf_weights.ndim == 1:
            self.rbf_weights = np.tile(self.rbf_weights, (f, 1))
        if self.rbf_weights.shape != (f, self.rbf_centers.size):
            raise ValueError("rbf_weights must have one row of len(rbf_centers) per filter")
        if not self.rbf_sigma > 0:
            raise ValueError("rbf_sigma must be positive")
        if not self.input_scale > 0:
            raise ValueError("input_scale must be positive")

    @staticmethod
    def filter_bank(size: int) -> np.ndarray:
        """Centred unit impulse followed by the non-constant orthonormal 2-D DCT atoms."""
        n = np.arange(size)
        c = np.cos(np.pi * (n[None, :] + 0.5) * n[:, None] / size)
        c /= np.linalg.norm(c, axis=1, keepdims=True)
        atoms = [np.outer(c[a], c[b]) for a in range(size) for b in range(size) if a + b > 0]
        delta = np.zeros((size, size))
        delta[size // 2, size // 2] = 1.0
        return np.array([delta] + atoms)

    @classmethod
    def init(
        cls,
        rng: np.random.Generator,
        n_filters: int = 9,
        size: int = 3,
        n_centers: int = 21,
        input_scale: float = 1.0,
        jitter: float = 0.01,
    ) -> "ConvRbf":
        """Filters from :meth:`filter_bank` plus a small seeded jitter, zero RBF weights.

        The output filters are the flipped input filters, so a unit starts out
        as a sum of ``f^T phi(f * v)`` terms.
        """
        bank = cls.filter_bank(size)
        if not 1 <= n_filters <= len(bank):
            raise ValueError(f"n_filters must lie in [1, {len(bank)}] for size {size}")
        fin = bank[:n_filters] + rng.uniform(-jitter, jitter, (n_filters, size, size))
        centers = np.linspace(-1.0, 1.0, n_centers)
        sigma = centers[1] - centers[0] if n_centers > 1 else 1.0
        return cls(
            filters_in=fin,
            filters_out=fin[:, ::-1, ::-1].copy(),
            rbf_weights=np.zeros((n_filters, n_centers)),
            rbf_centers=centers,
            rbf_sigma=sigma,
            input_scale=input_scale,
        )

    @property
    def kernels_in(self) -> list[Kernel]:
        return [Kernel(t) for t in self.filters_in]

    @property
    def kernels_out(self) -> list[Kernel]:
        return [Kernel(t) for t in self.filters_out]

    def _basis(self, a: np.ndarray):
        # a: (F, *lead, H, W) -> Gaussian features (F, *lead, H, W, J) and d/da
        z = a[..., None] / self.input_scale - self.rbf_centers
        phi = np.exp(-(z * z) / (2.0 * self.rbf_sigma**2))
        dphi = phi * (-z / (self.rbf_sigma**2 * self.input_scale))
        return phi, dphi

    def _weights(self, ndim: int) -> np.ndarray:
        return self.rbf_weights.reshape(
            self.rbf_weights.shape[:1] + (1,) * (ndim - 1) + self.rbf_weights.shape[1:]
        )

    def _forward(self, v: np.ndarray):
        shape = v.shape[-2:]
        vf = np.fft.fft2(v)
        oin = _bcast(_otf(self.filters_in, shape), v.ndim + 1)
        oout = _bcast(_otf(self.filters_out, shape), v.ndim + 1)
        a = np.fft.ifft2(vf[None] * oin).real
        basis, dbasis = self._basis(a)
        wts = self._weights(a.ndim)
        h = np.sum(basis * wts, axis=-1)
        out = np.fft.ifft2(np.fft.fft2(h) * oout).real.sum(axis=0)
        return out, (vf, oin, oout, a, basis, dbasis, h)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self._forward(v)[0]

    def linear_features(self, v: np.ndarray) -> np.ndarray:
        """Columns ``f_out_i * exp(...)_j(f_in_i * v)``, one per RBF weight, so
        that ``apply(v).ravel() == linear_features(v) @ rbf_weights.ravel()``."""
        shape = v.shape[-2:]
        vf = np.fft.fft2(v)
        oin = _otf(self.filters_in, shape)
        oout = _otf(self.filters_out, shape)
        cols = []
        for i in range(len(oin)):
            a = np.fft.ifft2(vf * oin[i]).real
            phi = np.moveaxis(self._basis(a)[0], -1, 0)
            col = np.fft.ifft2(np.fft.fft2(phi) * oout[i]).real
            cols.append(col.reshape(len(phi), -1).T)
        return np.concatenate(cols, axis=1)

    def linear_slice(self) -> slice:
        n1 = self.filters_in.size
        return slice(n1, n1 + self.rbf_weights.size)

    def with_linear(self, w: np.ndarray) -> "ConvRbf":
        return replace(self, rbf_weights=np.reshape(w, self.rbf_weights.shape))

    def params(self) -> np.ndarray:
        return np.concatenate(
            [self.filters_in.ravel(), self.rbf_weights.ravel(), self.filters_out.ravel()]
        )

    def with_params(self, theta: np.ndarray) -> "ConvRbf":
        n1 = self.filters_in.size
        n2 = self.rbf_weights.size
        return replace(
            self,
            filters_in=theta[:n1].reshape(self.filters_in.shape),
            rbf_weights=theta[n1 : n1 + n2].reshape(self.rbf_weights.shape),
            filters_out=theta[n1 + n2 :].reshape(self.filters_out.shape),
        )

    def vjp(self, v: np.ndarray, upstream: np.ndarray) -> np.ndarray:
        """Gradient of ``<upstream, G(v)>`` with respect to :meth:`params`."""
        _, (vf, oin, oout, a, basis, dbasis, h) = self._forward(v)
        f, kh, kw = self.filters_in.shape
        lead = tuple(range(1, a.ndim - 2))
        uf = np.fft.fft2(upstream)[None]
        # d/d f_out: correlate upstream with h, then read the centred window
        corr_out = np.fft.ifft2(uf * np.conj(np.fft.fft2(h))).real
        g_out = _extract_taps(corr_out.sum(axis=lead) if lead else corr_out, kh, kw)
        dh = np.fft.ifft2(uf * np.conj(oout)).real
        axes = tuple(range(1, a.ndim))
        g_w = np.sum(dh[..., None] * basis, axis=axes)
        da = dh * np.sum(dbasis * self._weights(a.ndim), axis=-1)
        corr_in = np.fft.ifft2(np.fft.fft2(da) * np.conj(vf)[None]).real
        g_in = _extract_taps(corr_in.sum(axis=lead) if lead else corr_in, kh, kw)
        return np.concatenate([g_in.ravel(), g_w.ravel(), g_out.ravel()])


@dataclass(eq=False)
class LinearDiffusion:
    kernel: Kernel
    gain: float

    kind = "linear_diffusion"
    tag = 2

    def apply(self, v: np.ndarray) -> np.ndarray:
        if self.gain == 0:
            return np.zeros_like(v)
        return self.gain * adjoint_conv2_circ(conv2_circ(v, self.kernel), self.kernel)

    def params(self) -> np.ndarray:
        return np.array([self.gain], dtype=np.float64)

    def with_params(self, theta: np.ndarray) -> "LinearDiffusion":
        return replace(self, gain=float(theta[0]))

    def vjp(self, v: np.ndarray, upstream: np.ndarray) -> np.ndarray:
        ktk = adjoint_conv2_circ(conv2_circ(v, self.kernel), self.kernel)
        return np.array([np.sum(upstream * ktk)])

    def linear_features(self, v: np.ndarray) -> np.ndarray:
        return adjoint_conv2_circ(conv2_circ(v, self.kernel), self.kernel).reshape(-1, 1)

    def linear_slice(self) -> slice:
        return slice(0, 1)

    def with_linear(self, w: np.ndarray) -> "LinearDiffusion":
        return self.with_params(np.reshape(w, 1))


@dataclass(eq=False)
class SmoothedPrioxGrad:
    p: float
    weight: float
    epsilon: float

    kind = "smoothed_prior_grad"
    tag = 3

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def _shape_fn(self, v):
        return self.p * v * (v * v + self.epsilon) ** ((self.p - 2.0) / 2.0)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.weight * self._shape_fn(v)

    def params(self) -> np.ndarray:
        return np.array([self.weight], dtype=np.float64)

    def with_params(self, theta: np.ndarray) -> "SmoothedPrioxGrad":
        return replace(self, weight=float(theta[0]))

    def vjp(self, v: np.ndarray, upstream: np.ndarray) -> np.ndarray:
        return np.array([np.sum(upstream * self._shape_fn(v))])

    def linear_features(self, v: np.ndarray) -> np.ndarray:
        return self._shape_fn(v).reshape(-1, 1)

    def linear_slice(self) -> slice:
        return slice(0, 1)

    def with_linear(self, w: np.ndarray) -> "SmoothedPrioxGrad":
        return self.with_params(np.reshape(w, 1))


Unit = ConvRbf | LinearDiffusion | SmoothedPrioxGrad
_UNIT_TYPES = {cls.tag: cls for cls in (ConvRbf, LinearDiffusion, SmoothedPrioxGrad)}


@dataclass(eq=False)
class BuiltInNetwork:
    units: list = field(default_factory=list)
    alpha: float = 1.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        self.units = list(self.units)

    def __len__(self):
        return len(self.units)

    def with_alpha(self, alpha: float) -> "BuiltInNetwork":
        return BuiltInNetwork(self.units, alpha)


def unit_apply(unit, v) -> np.ndarray:
    return unit.apply(as_grid(v, "v"))


def network_apply(net: BuiltInNetwork, v0, alpha: float | None = None) -> np.ndarray:
    """Run the residual recursion through every unit and return ``v_T``."""
    a = net.alpha if alpha is None else alpha
    v = as_grid(v0, "v0")
    if a == 0 or not net.units:
        return v.copy()
    for unit in net.units:
        v = v - a * unit.apply(v)
    return v


@dataclass(frozen=True)
class ArchitectureReport:
    passed: bool
    worst_ratio: float
    worst_sample: int
    worst_deviation: float


def check_architecture_condition(
    net: BuiltInNetwork, samples: Sequence, c_n: float
) -> ArchitectureReport:
    """Check ``||N(v) - v|| <= C_N * alpha`` on every sample."""
    if not samples:
        raise ValueError("need at least one sample")
    devs = [float(np.linalg.norm(network_apply(net, v) - np.asarray(v))) for v in samples]
    i = int(np.argmax(devs))
    worst = devs[i]
    if net.alpha > 0:
        ratio = worst / net.alpha
    else:
        ratio = 0.0 if worst == 0 else float("inf")
    return ArchitectureReport(worst <= c_n * net.alpha, ratio, i, worst)


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainingPair:
    input: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        if np.shape(self.input) != np.shape(self.target):
            raise ValueError("input and target must have the same shape")


@dataclass(frozen=True)
class TrainConfig:
    """Stage trainer settings.

    ``batch`` is the number of training instances synthesised by the bench
    harness; the trainer itself always uses every pair it is given.  ``ridge``
    is the relative Tikhonov weight of the closed-form warm start of a unit's
    linear output weights (a negative value disables the warm start).
    """

    learning_rate: float = 50.0
    epochs: int = 2
    batch: int = 4
    seed: int = 0
    unit: str = "conv_rbf"
    filters: int = 9
    filter_size: int = 3
    centers: int = 21
    ridge: float = 1e-3

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.filters > self.filter_size**2:
            raise ValueError("filters must not exceed filter_size**2")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        for name in ("batch", "filters", "filter_size", "centers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.filter_size % 2 == 0:
            raise ValueError("filter_size must be odd")
        if self.unit not in ("conv_rbf", "linear_diffusion", "smoothed_prior_grad"):
            raise ValueError(f"unknown unit kind {self.unit!r}")


def new_unit(cfg: TrainConfig, rng: np.random.Generator, input_scale: float = 1.0):
    """Freshly initialised unit of the configured kind."""
    if cfg.unit == "conv_rbf":
        return ConvRbf.init(rng, cfg.filters, cfg.filter_size, cfg.centers, input_scale)
    if cfg.unit == "linear_diffusion":
        return LinearDiffusion(Kernel.identity(), 0.1)
    return SmoothedPrioxGrad(p=0.8, weight=0.1, epsilon=1e-2)


def stage_loss(unit, alpha: float, inputs, targets) -> float:
    total = 0.0
    for v, t in zip(inputs, targets):
        r = v - alpha * unit.apply(v) - t
        total += float(np.sum(r * r))
    return total


def unit_param_grad(unit, net_context: BuiltInNetwork, pair: TrainingPair) -> np.ndarray:
    """Gradient of ``||N^+(input) - target||^2`` with respect to ``unit``'s parameters.

    ``net_context`` is the frozen prefix network; its ``alpha`` is used for
    the appended unit too.
    """
    alpha = net_context.alpha
    v = network_apply(net_context, pair.input)
    r = v - alpha * unit.apply(v) - np.asarray(pair.target)
    return unit.vjp(v, -2.0 * alpha * r)


def _loss_and_grad(unit, alpha, inputs, targets):
    loss = 0.0
    grad = np.zeros_like(unit.params())
    for v, t in zip(inputs, targets):
        r = v - alpha * unit.apply(v) - t
        loss += float(np.sum(r * r))
        grad += unit.vjp(v, -2.0 * alpha * r)
    return loss, grad


def fit_linear(unit, alpha: float, inputs, targets, ridge: float):
    """Closed-form ridge fit of the weights that enter ``unit`` linearly.

    Minimises ``sum ||v - alpha * A(v) w - t||^2 + ridge * mean(diag(A^T A)) ||w||^2``
    where ``A(v)`` are the unit's :meth:`linear_features`.  Starting from zero
    weights this never raises the stage loss.
    """
    if alpha == 0:
        return unit
    gram = 0.0
    rhs = 0.0
    for v, t in zip(inputs, targets):
        a = unit.linear_features(v)
        gram = gram + a.T @ a
        rhs = rhs + a.T @ ((v - t).ravel() / alpha)
    gram = np.atleast_2d(gram)
    shift = ridge * float(np.mean(np.diag(gram)))
    if shift <= 0:
        shift = 1e-12 * max(float(np.max(np.diag(gram))), 1.0)
    w = np.linalg.solve(gram + shift * np.eye(len(gram)), np.atleast_1d(rhs))
    return unit.with_linear(w)


def train_stage(
    net: BuiltInNetwork,
    stage: int,
    data: Sequence[TrainingPair],
    cfg: TrainConfig,
    rng: np.random.Generator | None = None,
    history: list | None = None,
) -> BuiltInNetwork:
    """Append one fresh unit to ``net`` and fit it.

    The earlier units stay frozen.  With ``cfg.ridge >= 0`` the unit's linear
    output weights are set by :func:`fit_linear`, each epoch takes a gradient
    step on the remaining parameters and re-fits the linear ones.  Otherwise
    every parameter follows plain gradient descent.  The step size starts at
    ``learning_rate`` divided by the number of grid entries in ``data``; a
    step that raises the loss is rejected and the step size halved, so the
    recorded loss never increases.
    """
    if stage != len(net.units):
        raise ValueError(f"stage {stage} does not match the current unit count {len(net.units)}")
    if not data:
        raise ValueError("training data is empty")
    if rng is None:
        rng = np.random.default_rng([cfg.seed, stage])
    inputs = [network_apply(net, p.input) for p in data]
    targets = [np.asarray(p.target, dtype=np.float64) for p in data]
    n_entries = sum(v.size for v in inputs)
    alpha = net.alpha

    scale = max(float(np.max(np.abs(np.concatenate([v.ravel() for v in inputs])))), 1e-12)
    unit = new_unit(cfg, rng, input_scale=scale)
    mask = np.ones(unit.params().size)
    refit = cfg.ridge >= 0
    if refit:
        unit = fit_linear(unit, alpha, inputs, targets, cfg.ridge)
        mask[unit.linear_slice()] = 0.0
    theta = unit.params()
    loss, grad = _loss_and_grad(unit, alpha, inputs, targets)
    if not np.isfinite(loss):
        raise TrainingDivergence(f"non-finite initial loss at stage {stage}")
    if history is not None:
        history.append(loss)
    lr = cfg.learning_rate / n_entries
    epochs = cfg.epochs if mask.any() else 0
    for _ in range(epochs):
        cand = unit.with_params(theta - lr * grad * mask)
        if refit:
            cand = fit_linear(cand, alpha, inputs, targets, cfg.ridge)
        c_loss, c_grad = _loss_and_grad(cand, alpha, inputs, targets)
        if not np.isfinite(c_loss):
            if lr * n_entries < 1e-12:
                raise TrainingDivergence(f"non-finite loss at stage {stage}")
            lr *= 0.5
        elif c_loss > loss:
            lr *= 0.5
        else:
            unit, theta, loss, grad = cand, cand.params(), c_loss, c_grad
        if history is not None:
            history.append(loss)
    return BuiltInNetwork(net.units + [unit], alpha)


# ---------------------------------------------------------------------------
# binary container
#
#   b"PADN" | u32 version | u32 network count
#   per network:  f64 alpha | u32 unit count
#   per unit:     u32 kind tag | u32 n_ints | u32[n_ints] | u32 n_floats | f64[n_floats]
#
# All integers and floats are little-endian.


def _unit_payload(unit) -> tuple[list[int], np.ndarray]:
    if isinstance(unit, ConvRbf):
        f, h, w = unit.filters_in.shape
        floats = np.concatenate(
            [
                unit.filters_in.ravel(),
                unit.filters_out.ravel(),
                unit.rbf_weights.ravel(),
                unit.rbf_centers.ravel(),
                [unit.rbf_sigma, unit.input_scale],
            ]
        )
        return [f, h, w, unit.rbf_centers.size], floats
    if isinstance(unit, LinearDiffusion):
        h, w = unit.kernel.shape
        return [h, w], np.concatenate([unit.kernel.taps.ravel(), [unit.gain]])
    if isinstance(unit, SmoothedPrioxGrad):
        return [], np.array([unit.p, unit.weight, unit.epsilon])
    raise TypeError(f"cannot serialise unit of type {type(unit).__name__}")


def _unit_from_payload(tag: int, ints: list[int], floats: np.ndarray):
    if tag == ConvRbf.tag:
        f, h, w, j = ints
        n = f * h * w
        fin = floats[:n].reshape(f, h, w)
        fout = floats[n : 2 * n].reshape(f, h, w)
        wts = floats[2 * n : 2 * n + f * j].reshape(f, j)
        centers = floats[2 * n + f * j : 2 * n + f * j + j]
        sigma, scale = floats[-2:]
        return ConvRbf(fin, fout, wts, centers, float(sigma), float(scale))
    if tag == LinearDiffusion.tag:
        h, w = ints
        return LinearDiffusion(Kernel(floats[: h * w].reshape(h, w)), float(floats[-1]))
    if tag == SmoothedPrioxGrad.tag:
        p, weight, eps = floats
        return SmoothedPrioxGrad(float(p), float(weight), float(eps))
    raise ValueError(f"unknown unit kind tag {tag}")


def dump_networks(nets: Sequence[BuiltInNetwork]) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", FORMAT_VERSION, len(nets)))
    for net in nets:
        buf.write(struct.pack("<dI", float(net.alpha), len(net.units)))
        for unit in net.units:
            ints, floats = _unit_payload(unit)
            buf.write(struct.pack(f"<II{len(ints)}I", unit.tag, len(ints), *ints))
            buf.write(struct.pack("<I", floats.size))
            buf.write(np.asarray(floats, dtype="<f8").tobytes())
    return buf.getvalue()


def load_networks(data: bytes) -> list[BuiltInNetwork]:
    view = memoryview(data)
    if bytes(view[:4]) != MAGIC:
        raise ValueError("not a network container (bad magic)")
    pos = 4

    def take(fmt):
        nonlocal pos
        vals = struct.unpack_from(fmt, view, pos)
        pos += struct.calcsize(fmt)
        return vals

    version, n_nets = take("<II")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported container version {version}")
    nets = []
    for _ in range(n_nets):
        alpha, n_units = take("<dI")
        units = []
        for _ in range(n_units):
            tag, n_ints = take("<II")
            ints = list(take(f"<{n_ints}I"))
            (n_floats,) = take("<I")
            floats = np.frombuffer(view, dtype="<f8", count=n_floats, offset=pos).astype(np.float64)
            pos += 8 * n_floats
            units.append(_unit_from_payload(tag, ints, floats))
        nets.append(BuiltInNetwork(units, alpha))
    if pos != len(view):
        raise ValueError("trailing bytes after network container")
    return nets


def save_networks(path, nets: Sequence[BuiltInNetwork]) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_networks(nets))


def read_networks(path) -> list[BuiltInNetwork]:
    with open(path, "rb") as fh:
        return load_networks(fh.read())
