"""Synthetic non-blind deconvolution instances.

A ground-truth image is a seeded stack of constant rectangles.  It is
blurred with a circular convolution and corrupted by white Gaussian noise.
The gradient-domain instance optimizes over ``g = D(x)`` with fidelity
``1/2 ||k * g - D(y)||^2``; the image-domain instance uses the coupled
fidelity with the image eliminated by a linear solve.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .energy import ConvQuadratic, CoupledImage, EnergyModel, Prior, image_from_gradients
from .tensor import Kernel, conv2_circ, grad_op

__all__ = [
    "GRADIENT",
    "IMAGE",
    "ProblemSpec",
    "Problem",
    "parse_kernel_kind",
    "make_kernel",
    "synth_image",
    "make_deconv_gradient_problem",
    "make_deconv_image_problem",
    "make_problem",
    "image_from_gradients",
]

GRADIENT = "gradient"
IMAGE = "image"

_KERNEL_RE = re.compile(r"^\s*(\w+)\s*(?:\(([^)]*)\))?\s*$")


def parse_kernel_kind(text: str) -> tuple[str, tuple[float, ...]]:
    """``"gaussian(1.5)"`` -> ``("gaussian", (1.5,))``."""
    m = _KERNEL_RE.match(text)
    if not m:
        raise ValueError(f"malformed kernel kind {text!r}")
    name = m.group(1).lower()
    args = tuple(float(a) for a in m.group(2).split(",")) if m.group(2) else ()
    arity = {"identity": 0, "gaussian": 1, "motion": 2}
    if name not in arity:
        raise ValueError(f"unknown kernel kind {name!r}")
    if len(args) != arity[name]:
        raise ValueError(f"kernel {name!r} takes {arity[name]} argument(s), got {len(args)}")
    return name, args


def make_kernel(kind: str) -> Kernel:
    name, args = parse_kernel_kind(kind)
    if name == "identity":
        return Kernel.identity()
    if name == "gaussian":
        return Kernel.gaussian(args[0])
    return Kernel.motion(args[0], args[1])


@dataclass(frozen=True)
class ProblemSpec:
    domain: str = GRADIENT
    size: tuple[int, int] = (64, 64)
    kernel_kind: str = "gaussian(1.5)"
    noise_sigma: float = 0.01
    reg_weight: float = 0.002
    p: float = 1.0
    seed: int = 0
    # the coupled fidelity has Lipschitz gradient constant beta; the unit-step
    # error correction is only stable for beta of order one
    beta: float = 1.0

    def __post_init__(self):
        if self.domain not in (GRADIENT, IMAGE):
            raise ValueError(f"domain must be {GRADIENT!r} or {IMAGE!r}")
        size = tuple(int(s) for s in self.size)
        if len(size) != 2 or min(size) < 1:
            raise ValueError("size must be two positive integers")
        object.__setattr__(self, "size", size)
        k = make_kernel(self.kernel_kind)
        if size[0] < k.height or size[1] < k.width:
            raise ValueError(f"size {size} is smaller than the kernel support {k.shape}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if not self.reg_weight > 0:
            raise ValueError("reg_weight must be positive")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    @property
    def kernel(self) -> Kernel:
        return make_kernel(self.kernel_kind)

    @property
    def prior(self) -> Prior:
        return Prior.from_p(self.p, self.reg_weight)


@dataclass(frozen=True, eq=False)
class Problem:
    """A synthesized instance.

    ``ground_truth`` is the truth for the optimization variable (the gradient
    stack ``D(x_gt)``) and ``observation`` the blurred noisy image ``y``.
    """

    spec: ProblemSpec
    model: EnergyModel
    ground_truth: np.ndarray
    observation: np.ndarray
    image_truth: np.ndarray
    kernel: Kernel
    init: np.ndarray = field(repr=False, default=None)

    def image(self, g) -> np.ndarray:
        """Image reassembled from a gradient estimate."""
        return image_from_gradients(self.observation, self.kernel, g, self.spec.beta)


def synth_image(size, rng: np.random.Generator, n_rects: int | None = None) -> np.ndarray:
    """Piecewise-constant image in [0, 1] made of random rectangles."""
    rows, cols = size
    img = np.full((rows, cols), rng.uniform(0.1, 0.4))
    if n_rects is None:
        n_rects = int(rng.integers(6, 11))
    for _ in range(n_rects):
        h = int(rng.integers(max(2, rows // 8), max(3, rows // 2)))
        w = int(rng.integers(max(2, cols // 8), max(3, cols // 2)))
        r0 = int(rng.integers(0, rows - h + 1))
        c0 = int(rng.integers(0, cols - w + 1))
        img[r0 : r0 + h, c0 : c0 + w] = rng.uniform(0.0, 1.0)
    return img


def _synthesize(spec: ProblemSpec):
    rng = np.random.default_rng(spec.seed)
    x_gt = synth_image(spec.size, rng)
    k = spec.kernel
    y = conv2_circ(x_gt, k)
    if spec.noise_sigma > 0:
        y = y + spec.noise_sigma * rng.standard_normal(y.shape)
    return x_gt, k, y


def make_deconv_gradient_problem(spec: ProblemSpec) -> Problem:
    if spec.domain != GRADIENT:
        raise ValueError("spec.domain must be 'gradient'")
    x_gt, k, y = _synthesize(spec)
    b = grad_op(y)
    model = EnergyModel(ConvQuadratic(k, b), spec.prior)
    return Problem(spec, model, grad_op(x_gt), y, x_gt, k, init=b.copy())


def make_deconv_image_problem(spec: ProblemSpec) -> Problem:
    if spec.domain != IMAGE:
        raise ValueError("spec.domain must be 'image'")
    x_gt, k, y = _synthesize(spec)
    model = EnergyModel(CoupledImage(k, y, spec.beta), spec.prior)
    return Problem(spec, model, grad_op(x_gt), y, x_gt, k, init=grad_op(y))


def make_problem(spec: ProblemSpec) -> Problem:
    if spec.domain == GRADIENT:
        return make_deconv_gradient_problem(spec)
    return make_deconv_image_problem(spec)
