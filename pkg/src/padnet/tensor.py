"""Dense grid arithmetic: circular convolution, frequency-domain solves, metrics.

Grids are plain ``float64`` numpy arrays.  The last two axes are the spatial
(row, col) axes; any leading axes are treated as independent channels and are
broadcast through every operation, so a pair of gradient images is simply an
array of shape ``(2, rows, cols)``.

All convolutions use periodic boundaries.  The DFT convention is numpy's
unnormalized ``fft2``, for which Parseval reads ``||x||^2 = ||F(x)||^2 / N``
with ``N = rows * cols``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ShapeError",
    "SingularSystemError",
    "NonFiniteError",
    "Kernel",
    "Metrics",
    "as_grid",
    "kernel_otf",
    "conv2_circ",
    "adjoint_conv2_circ",
    "solve_diag_freq",
    "apply_normal_operator",
    "gradient_filters",
    "grad_op",
    "grad_adjoint",
    "psnr",
    "rel_error",
    "metrics",
    "PSNR_CAP_DB",
]

PSNR_CAP_DB = 300.0
_SINGULAR_TOL = 1e-14
_IMAG_TOL = 1e-10


class ShapeError(ValueError):
    """Operands have incompatible shapes."""


class SingularSystemError(ArithmeticError):
    """A frequency-domain system has a (numerically) zero eigenvalue."""


class NonFiniteError(ValueError):
    """A grid contains NaN or infinite entries."""


def as_grid(x, name: str = "grid") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim < 2:
        raise ShapeError(f"{name} must have at least 2 dimensions, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class Kernel:
    """A small 2-D filter with odd height and width, centred on its middle tap."""

    taps: np.ndarray

    def __post_init__(self):
        taps = np.array(self.taps, dtype=np.float64, copy=True)
        if taps.ndim != 2:
            raise ShapeError(f"kernel taps must be 2-D, got shape {taps.shape}")
        h, w = taps.shape
        if h % 2 == 0 or w % 2 == 0:
            raise ShapeError(f"kernel dimensions must be odd, got {h}x{w}")
        if not np.all(np.isfinite(taps)):
            raise ValueError("kernel taps must be finite")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)

    @property
    def height(self) -> int:
        return self.taps.shape[0]

    @property
    def width(self) -> int:
        return self.taps.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.taps.shape

    def __eq__(self, other):
        return isinstance(other, Kernel) and np.array_equal(self.taps, other.taps)

    def __hash__(self):
        return hash((self.taps.shape, self.taps.tobytes()))

    def __repr__(self):
        return f"Kernel({self.height}x{self.width})"

    @classmethod
    def identity(cls) -> "Kernel":
        return cls(np.ones((1, 1)))

    @classmethod
    def blur(cls, taps) -> "Kernel":
        """Nonnegative kernel normalized to unit sum."""
        taps = np.asarray(taps, dtype=np.float64)
        if np.any(taps < 0):
            raise ValueError("blur kernel taps must be nonnegative")
        total = taps.sum()
        if total <= 0:
            raise ValueError("blur kernel must have positive mass")
        return cls(taps / total)

    @classmethod
    def gaussian(cls, sigma: float, radius: int | None = None) -> "Kernel":
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        if radius is None:
            radius = max(1, int(np.ceil(3 * sigma)))
        r = np.arange(-radius, radius + 1)
        g = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2 * sigma**2))
        return cls.blur(g)

    @classmethod
    def motion(cls, length: float, angle_deg: float) -> "Kernel":
        """Linear motion blur of the given length (pixels) and direction."""
        if length < 1:
            raise ValueError("motion length must be at least 1")
        radius = int(np.ceil((length - 1) / 2))
        size = 2 * radius + 1
        taps = np.zeros((size, size))
        theta = np.deg2rad(angle_deg)
        # supersample the segment and splat bilinearly
        n = max(8, int(8 * length))
        for s in np.linspace(-(length - 1) / 2, (length - 1) / 2, n):
            x = radius + s * np.cos(theta)
            y = radius - s * np.sin(theta)
            x0, y0 = int(np.floor(x)), int(np.floor(y))
            fx, fy = x - x0, y - y0
            for dy, wy in ((0, 1 - fy), (1, fy)):
                for dx, wx in ((0, 1 - fx), (1, fx)):
                    yy, xx = y0 + dy, x0 + dx
                    if 0 <= yy < size and 0 <= xx < size:
                        taps[yy, xx] += wy * wx
        return cls.blur(taps)


def _check_fits(x: np.ndarray, k: Kernel):
    rows, cols = x.shape[-2:]
    if rows < k.height or cols < k.width:
        raise ShapeError(
            f"grid of shape {x.shape} is smaller than kernel of shape {k.shape}"
        )


@lru_cache(maxsize=256)
def _otf_cached(k: Kernel, shape: tuple[int, int]) -> np.ndarray:
    rows, cols = shape
    pad = np.zeros(shape)
    h, w = k.shape
    pad[:h, :w] = k.taps
    pad = np.roll(pad, (-(h // 2), -(w // 2)), axis=(0, 1))
    otf = np.fft.fft2(pad)
    otf.setflags(write=False)
    return otf


def kernel_otf(k: Kernel, shape: Sequence[int]) -> np.ndarray:
    """Transfer function of ``k`` on a periodic grid of the given (rows, cols)."""
    return _otf_cached(k, (int(shape[-2]), int(shape[-1])))


def _real(z: np.ndarray) -> np.ndarray:
    scale = max(1.0, float(np.max(np.abs(z.real), initial=0.0)))
    resid = float(np.max(np.abs(z.imag), initial=0.0))
    if resid > _IMAG_TOL * scale:
        raise ArithmeticError(f"imaginary residue {resid:.3e} exceeds tolerance")
    return np.ascontiguousarray(z.real)


def conv2_circ(x, k: Kernel) -> np.ndarray:
    """Periodic convolution ``(x * k)[i, j] = sum_ab k[a, b] x[i - a', j - b']``.

    Offsets ``a', b'`` are measured from the kernel centre, so an impulse at
    (0, 0) produces a copy of the kernel wrapped around (0, 0).
    """
    x = as_grid(x, "x")
    _check_fits(x, k)
    if k.shape == (1, 1):
        return x * k.taps[0, 0]
    return _real(np.fft.ifft2(np.fft.fft2(x) * kernel_otf(k, x.shape)))


def adjoint_conv2_circ(x, k: Kernel) -> np.ndarray:
    """Adjoint of :func:`conv2_circ`: periodic correlation with ``k``."""
    x = as_grid(x, "x")
    _check_fits(x, k)
    if k.shape == (1, 1):
        return x * k.taps[0, 0]
    return _real(np.fft.ifft2(np.fft.fft2(x) * np.conj(kernel_otf(k, x.shape))))


def _normal_symbol(terms, shape, ridge: float) -> np.ndarray:
    denom = np.full(tuple(shape[-2:]), float(ridge))
    for k, w in terms:
        denom = denom + w * np.abs(kernel_otf(k, shape)) ** 2
    return denom


def solve_diag_freq(terms: Iterable[tuple[Kernel, float]], rhs, ridge: float) -> np.ndarray:
    """Solve ``(sum_i w_i K_i^T K_i + ridge I) z = rhs`` under periodic boundaries.

    Raises
    ------
    SingularSystemError
        If the operator symbol drops below 1e-14 at any frequency.
    """
    rhs = as_grid(rhs, "rhs")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    terms = list(terms)
    for k, _ in terms:
        _check_fits(rhs, k)
    denom = _normal_symbol(terms, rhs.shape, ridge)
    smallest = float(denom.min())
    if smallest < _SINGULAR_TOL:
        raise SingularSystemError(
            f"singular system: operator symbol reaches {smallest:.3e} (< {_SINGULAR_TOL:g})"
        )
    return _real(np.fft.ifft2(np.fft.fft2(rhs) / denom))


def apply_normal_operator(terms: Iterable[tuple[Kernel, float]], z, ridge: float) -> np.ndarray:
    """Apply ``sum_i w_i K_i^T K_i + ridge I`` in the spatial domain."""
    z = as_grid(z, "z")
    out = ridge * z
    for k, w in terms:
        out = out + w * adjoint_conv2_circ(conv2_circ(z, k), k)
    return out


def gradient_filters() -> tuple[Kernel, Kernel]:
    """Forward-difference pair ``(d_x, d_y)``.

    ``conv2_circ(x, d_x)[i, j] = x[i, j+1] - x[i, j]`` and likewise for rows.
    """
    dx = Kernel(np.array([[1.0, -1.0, 0.0]]))
    dy = Kernel(np.array([[1.0], [-1.0], [0.0]]))
    return dx, dy


def grad_op(x) -> np.ndarray:
    """Stack of horizontal and vertical forward differences, shape ``(2, ...)``."""
    dx, dy = gradient_filters()
    return np.stack([conv2_circ(x, dx), conv2_circ(x, dy)])


def grad_adjoint(g) -> np.ndarray:
    """Adjoint of :func:`grad_op`."""
    dx, dy = gradient_filters()
    g = as_grid(g, "g")
    return adjoint_conv2_circ(g[0], dx) + adjoint_conv2_circ(g[1], dy)


def psnr(a, b, peak: float = 1.0) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    if peak <= 0:
        raise ValueError("peak must be positive")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(peak**2 / mse))


def rel_error(a, ref, *, with_flag: bool = False):
    """``||a - ref|| / ||ref||``.

    When ``ref`` is identically zero the absolute error ``||a - ref||`` is
    returned instead; pass ``with_flag=True`` to receive ``(value, relative)``
    where ``relative`` is False in that case.
    """
    a = np.asarray(a, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if a.shape != ref.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {ref.shape}")
    diff = float(np.linalg.norm(a - ref))
    denom = float(np.linalg.norm(ref))
    relative = denom > 0.0
    value = diff / denom if relative else diff
    return (value, relative) if with_flag else value


@dataclass(frozen=True)
class Metrics:
    psnr_db: float
    rel_iter_error: float
    rel_recon_error: float


def metrics(x, x_prev, truth, peak: float = 1.0) -> Metrics:
    return Metrics(
        psnr_db=psnr(x, truth, peak),
        rel_iter_error=rel_error(x, x_prev),
        rel_recon_error=rel_error(x, truth),
    )
