import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from padnet.tensor import (
    PSNR_CAP_DB,
    Kernel,
    ShapeError,
    SingularSystemError,
    adjoint_conv2_circ,
    apply_normal_operator,
    conv2_circ,
    grad_adjoint,
    grad_op,
    gradient_filters,
    metrics,
    psnr,
    rel_error,
    solve_diag_freq,
)

seeds = st.integers(0, 2**32 - 1)


def loop_conv(x, taps):
    """Spatial periodic convolution ``y[i, j] = sum_ab t[a, b] x[i - a + ca, j - b + cb]``."""
    n, m = x.shape
    h, w = taps.shape
    ch, cw = h // 2, w // 2
    y = np.zeros_like(x)
    for i in range(n):
        for j in range(m):
            s = 0.0
            for a in range(h):
                for b in range(w):
                    s += taps[a, b] * x[(i - a + ch) % n, (j - b + cw) % m]
            y[i, j] = s
    return y


def dense_matrix(fn, shape):
    n = int(np.prod(shape))
    cols = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        cols.append(fn(e.reshape(shape)).ravel())
    return np.array(cols).T


def random_kernel(rng, h=3, w=3):
    return Kernel(rng.standard_normal((h, w)))


def test_impulse_places_flipped_taps(rng):
    taps = rng.standard_normal((3, 3))
    x = np.zeros((4, 4))
    x[0, 0] = 1.0
    y = conv2_circ(x, Kernel(taps))
    for a in range(3):
        for b in range(3):
            assert y[(a - 1) % 4, (b - 1) % 4] == pytest.approx(taps[a, b], abs=1e-12)


@given(seeds, st.sampled_from([(1, 1), (1, 3), (3, 3), (5, 3)]))
def test_conv_matches_spatial_loop(seed, ks):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((6, 7))
    taps = rng.standard_normal(ks)
    np.testing.assert_allclose(conv2_circ(x, Kernel(taps)), loop_conv(x, taps), atol=1e-12)


@given(seeds)
def test_conv_linearity(seed):
    rng = np.random.default_rng(seed)
    k = random_kernel(rng)
    x, y = rng.standard_normal((2, 8, 8))
    a, b = rng.standard_normal(2)
    lhs = conv2_circ(a * x + b * y, k)
    rhs = a * conv2_circ(x, k) + b * conv2_circ(y, k)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


@given(seeds)
def test_adjoint_inner_product(seed):
    rng = np.random.default_rng(seed)
    k = random_kernel(rng, 3, 5)
    x, y = rng.standard_normal((2, 8, 8))
    lhs = np.sum(conv2_circ(x, k) * y)
    rhs = np.sum(x * adjoint_conv2_circ(y, k))
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_conv_broadcasts_leading_axes(rng):
    k = random_kernel(rng)
    x = rng.standard_normal((2, 3, 8, 8))
    out = conv2_circ(x, k)
    np.testing.assert_allclose(out[1, 2], conv2_circ(x[1, 2], k), atol=1e-12)


def test_identity_kernel_is_noop(rng):
    x = rng.standard_normal((5, 5))
    np.testing.assert_array_equal(conv2_circ(x, Kernel.identity()), x)


def test_kernel_validation():
    with pytest.raises(ShapeError):
        Kernel(np.ones((2, 3)))
    with pytest.raises(ValueError):
        Kernel.blur(-np.ones((3, 3)))
    assert Kernel.gaussian(1.5).taps.sum() == pytest.approx(1.0, abs=1e-12)
    assert Kernel.motion(5, 30).taps.sum() == pytest.approx(1.0, abs=1e-12)


def test_kernel_larger_than_grid_rejected():
    with pytest.raises(ShapeError):
        conv2_circ(np.zeros((3, 3)), Kernel(np.ones((5, 5))))


def test_solve_matches_dense_solve(rng):
    k1, k2 = random_kernel(rng), random_kernel(rng, 1, 3)
    terms = [(k1, 0.7), (k2, 1.3)]
    rhs = rng.standard_normal((8, 8))
    ridge = 0.05
    op = dense_matrix(lambda z: apply_normal_operator(terms, z, ridge), (8, 8))
    expected = np.linalg.solve(op, rhs.ravel()).reshape(8, 8)
    np.testing.assert_allclose(solve_diag_freq(terms, rhs, ridge), expected, atol=1e-9)


@given(seeds)
def test_solve_residual(seed):
    rng = np.random.default_rng(seed)
    terms = [(random_kernel(rng), 1.0)]
    rhs = rng.standard_normal((2, 16, 16))
    z = solve_diag_freq(terms, rhs, 0.1)
    res = apply_normal_operator(terms, z, 0.1) - rhs
    assert np.linalg.norm(res) <= 1e-8 * np.linalg.norm(rhs)


def test_singular_system_raises():
    dx, _ = gradient_filters()
    with pytest.raises(SingularSystemError):
        solve_diag_freq([(dx, 1.0)], np.ones((8, 8)), 0.0)


def test_parseval(rng):
    x = rng.standard_normal((9, 12))
    assert np.sum(x * x) == pytest.approx(np.sum(np.abs(np.fft.fft2(x)) ** 2) / x.size, rel=1e-9)


def test_gradient_filters_are_forward_differences(rng):
    x = rng.standard_normal((5, 6))
    g = grad_op(x)
    np.testing.assert_allclose(g[0], np.roll(x, -1, axis=1) - x, atol=1e-12)
    np.testing.assert_allclose(g[1], np.roll(x, -1, axis=0) - x, atol=1e-12)


@given(seeds)
def test_gradient_adjoint(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((8, 8))
    g = rng.standard_normal((2, 8, 8))
    assert np.sum(grad_op(x) * g) == pytest.approx(np.sum(x * grad_adjoint(g)), abs=1e-10)
    for d in gradient_filters():
        y = rng.standard_normal((8, 8))
        assert np.sum(conv2_circ(x, d) * y) == pytest.approx(
            np.sum(x * adjoint_conv2_circ(y, d)), abs=1e-10
        )


def test_psnr_and_errors():
    a = np.zeros((4, 4))
    assert psnr(a, a) == PSNR_CAP_DB
    b = a + 0.1
    assert psnr(b, a) == pytest.approx(20.0)
    assert psnr(b, a, peak=10.0) == pytest.approx(40.0)
    assert rel_error(2 * np.ones(3), np.ones(3)) == pytest.approx(1.0)
    val, rel = rel_error(np.ones(4), np.zeros(4), with_flag=True)
    assert val == pytest.approx(2.0) and rel is False
    m = metrics(b, a, b)
    assert m.rel_recon_error == 0.0 and m.psnr_db == PSNR_CAP_DB
    with pytest.raises(ShapeError):
        rel_error(np.ones(3), np.ones(4))
