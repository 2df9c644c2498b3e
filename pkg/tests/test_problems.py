import dataclasses

import numpy as np
import pytest

from bench import desk_config
from padnet.energy import ConvQuadratic, CoupledImage
from padnet.experiment import solve
from padnet.problems import (
    ProblemSpec,
    make_deconv_gradient_problem,
    make_deconv_image_problem,
    make_problem,
    parse_kernel_kind,
)
from padnet.tensor import grad_op, psnr, rel_error


def test_parse_kernel_kind():
    assert parse_kernel_kind("gaussian(1.5)") == ("gaussian", (1.5,))
    assert parse_kernel_kind(" motion(7, 45) ") == ("motion", (7.0, 45.0))
    assert parse_kernel_kind("identity") == ("identity", ())
    for bad in ["gaussian", "motion(3)", "box(3)", "gaussian(1.5"]:
        with pytest.raises(ValueError):
            parse_kernel_kind(bad)


def test_spec_validation():
    for bad in [dict(size=(5, 5)), dict(noise_sigma=-1.0), dict(reg_weight=0.0), dict(p=1.5),
                dict(domain="fourier"), dict(beta=0.0), dict(size=(0, 8))]:
        with pytest.raises(ValueError):
            ProblemSpec(**bad)


def test_noiseless_identity_instance_is_exact():
    pb = make_problem(ProblemSpec(kernel_kind="identity", noise_sigma=0.0, size=(16, 16)))
    np.testing.assert_array_equal(pb.init, pb.ground_truth)
    assert pb.model.fidelity.value(pb.ground_truth) == 0.0


def test_seed_determinism():
    a = make_problem(ProblemSpec(seed=7, size=(32, 32)))
    b = make_problem(ProblemSpec(seed=7, size=(32, 32)))
    c = make_problem(ProblemSpec(seed=8, size=(32, 32)))
    assert a.observation.tobytes() == b.observation.tobytes()
    assert a.ground_truth.tobytes() == b.ground_truth.tobytes()
    assert a.observation.tobytes() != c.observation.tobytes()


def test_gradient_domain_structure():
    pb = make_deconv_gradient_problem(ProblemSpec(size=(24, 20)))
    assert isinstance(pb.model.fidelity, ConvQuadratic)
    assert pb.ground_truth.shape == (2, 24, 20)
    np.testing.assert_allclose(pb.ground_truth, grad_op(pb.image_truth))
    assert 0.0 <= pb.image_truth.min() and pb.image_truth.max() <= 1.0
    with pytest.raises(ValueError):
        make_deconv_gradient_problem(ProblemSpec(domain="image"))


def test_image_domain_consistency_limit():
    spec = ProblemSpec(domain="image", size=(24, 24), noise_sigma=0.0, beta=1e6)
    pb = make_deconv_image_problem(spec)
    assert isinstance(pb.model.fidelity, CoupledImage)
    x = pb.model.fidelity.image(pb.ground_truth)
    assert rel_error(x, pb.image_truth) <= 1e-4
    with pytest.raises(ValueError):
        make_deconv_image_problem(ProblemSpec())


def test_image_from_gradient_estimate():
    pb = make_problem(ProblemSpec(size=(32, 32), noise_sigma=0.0))
    x = pb.image(pb.ground_truth)
    assert rel_error(x, pb.image_truth) < 0.05


def test_image_domain_epadnet_beats_observation_psnr():
    cfg = desk_config()
    spec = dataclasses.replace(cfg.problem, domain="image", p=0.8)
    pb = make_problem(spec)
    g, _, _ = solve(pb, "epadnet", dataclasses.replace(cfg, problem=spec))
    gain = psnr(pb.image(g), pb.image_truth) - psnr(pb.observation, pb.image_truth)
    assert gain >= 1.0
