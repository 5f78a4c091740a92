import math

import numpy as np
import pytest

from xhmc import (
    GaussianModel,
    HamiltonianSystem,
    PhasePoint,
    check_divergence,
    exact_gaussian_flow,
    flip_momentum,
    leapfrog_step,
)
from xhmc.errors import ConfigurationError, UnsupportedModelError
from xhmc.integrator import StepConfig

from conftest import FlatModel
from oracles import leapfrog_jacobian


def test_leapfrog_hand_example(std1d):
    z = PhasePoint(np.array([1.0]), np.array([0.0]))
    z1, _ = leapfrog_step(std1d, z, 0.1)
    # p_half = -0.05; q' = 1 - 0.005 = 0.995; p' = -0.05 - 0.05 * 0.995
    assert z1.q[0] == pytest.approx(0.995, abs=1e-15)
    assert z1.p[0] == pytest.approx(-0.09975, abs=1e-15)


def test_leapfrog_free_particle_exact():
    sys = HamiltonianSystem(FlatModel(2))
    z = PhasePoint(np.array([1.0, -2.0]), np.array([0.5, 2.0]))
    z1, _ = leapfrog_step(sys, z, 0.3)
    np.testing.assert_allclose(z1.q, z.q + 0.3 * z.p, atol=1e-15)
    np.testing.assert_array_equal(z1.p, z.p)


def test_leapfrog_time_reversal(shipped_model):
    sys = HamiltonianSystem(shipped_model)
    rng = np.random.default_rng(21)
    for _ in range(20):
        z = PhasePoint(rng.standard_normal(sys.dimension), rng.standard_normal(sys.dimension))
        fwd, _ = leapfrog_step(sys, z, 0.1)
        back, _ = leapfrog_step(sys, fwd, -0.1)
        np.testing.assert_allclose(back.q, z.q, atol=1e-12)
        np.testing.assert_allclose(back.p, z.p, atol=1e-12)


def test_leapfrog_gradient_caching_chains():
    sys = HamiltonianSystem(GaussianModel.two_dim_corr(0.7))
    z = PhasePoint(np.array([1.0, 0.5]), np.array([0.2, -0.3]))
    z1, g1 = leapfrog_step(sys, z, 0.2)
    np.testing.assert_allclose(g1, sys.gradient(z1.q), atol=1e-14)
    z2a, _ = leapfrog_step(sys, z1, 0.2, g1)
    z2b, _ = leapfrog_step(sys, z1, 0.2)
    np.testing.assert_array_equal(z2a.q, z2b.q)
    np.testing.assert_array_equal(z2a.p, z2b.p)


def test_check_divergence_threshold():
    cfg = StepConfig(epsilon=0.1)
    assert not check_divergence(0.0, 500.0, cfg)
    assert check_divergence(0.0, 1001.0, cfg)
    assert check_divergence(0.0, float("nan"), cfg)
    assert check_divergence(0.0, float("inf"), cfg)
    # symmetric by default: large energy drops also flag
    assert check_divergence(0.0, -1001.0, cfg)


def test_check_divergence_signed_mode():
    cfg = StepConfig(epsilon=0.1, signed_divergence=True)
    assert check_divergence(0.0, -1001.0, cfg)  # h0 - h > threshold
    assert not check_divergence(0.0, 1001.0, cfg)
    assert check_divergence(0.0, float("nan"), cfg)


def test_step_config_validation():
    with pytest.raises(ConfigurationError):
        StepConfig(epsilon=0.0)
    with pytest.raises(ConfigurationError):
        StepConfig(epsilon=0.1, divergence_threshold=0.0)


def test_exact_flow_full_period(std1d):
    z = PhasePoint(np.array([1.0]), np.array([0.0]))
    z1 = exact_gaussian_flow(std1d, z, 2.0 * math.pi)
    np.testing.assert_allclose(z1.q, z.q, atol=1e-10)
    np.testing.assert_allclose(z1.p, z.p, atol=1e-10)


def test_exact_flow_quarter_period(std1d):
    z = PhasePoint(np.array([1.0]), np.array([0.0]))
    z1 = exact_gaussian_flow(std1d, z, math.pi / 2.0)
    assert z1.q[0] == pytest.approx(0.0, abs=1e-10)
    assert z1.p[0] == pytest.approx(-1.0, abs=1e-10)


def test_exact_flow_group_property():
    sys = HamiltonianSystem(GaussianModel.two_dim_corr(0.7))
    rng = np.random.default_rng(3)
    z = PhasePoint(rng.standard_normal(2), rng.standard_normal(2))
    z1 = exact_gaussian_flow(sys, exact_gaussian_flow(sys, z, 1.7), -1.7)
    np.testing.assert_allclose(z1.q, z.q, atol=1e-12)
    np.testing.assert_allclose(z1.p, z.p, atol=1e-12)


def test_exact_flow_conserves_energy():
    sys = HamiltonianSystem(GaussianModel.banded(3, 0.9))
    z = PhasePoint(np.array([1.0, -0.5, 0.2]), np.array([0.3, 0.1, -0.7]))
    h0 = sys.hamiltonian(z)
    for t in (0.3, 1.1, 7.9):
        assert sys.hamiltonian(exact_gaussian_flow(sys, z, t)) == pytest.approx(h0, abs=1e-10)


def test_exact_flow_rejects_unsupported():
    with pytest.raises(UnsupportedModelError):
        exact_gaussian_flow(
            HamiltonianSystem(FlatModel(1)),
            PhasePoint(np.zeros(1), np.zeros(1)),
            1.0,
        )
    from xhmc import EuclideanMetric
    sys = HamiltonianSystem(GaussianModel.iid(2), EuclideanMetric(np.array([1.0, 2.0])))
    with pytest.raises(UnsupportedModelError):
        exact_gaussian_flow(sys, PhasePoint(np.zeros(2), np.zeros(2)), 1.0)


def test_leapfrog_symplectic_jacobian(shipped_model):
    sys = HamiltonianSystem(shipped_model)
    rng = np.random.default_rng(12)
    for _ in range(3):
        z = PhasePoint(rng.standard_normal(sys.dimension), rng.standard_normal(sys.dimension))
        jac = leapfrog_jacobian(sys, z, 0.1)
        assert np.linalg.det(jac) == pytest.approx(1.0, abs=1e-6)


def test_energy_error_second_order_scaling():
    sys = HamiltonianSystem(GaussianModel.two_dim_corr(0.7))
    rng = np.random.default_rng(8)
    eps = 0.2
    total_time = 8.0

    def max_energy_error(epsilon):
        worst = 0.0
        rng_local = np.random.default_rng(8)
        for _ in range(20):
            z = PhasePoint(rng_local.standard_normal(2), rng_local.standard_normal(2))
            h0 = sys.hamiltonian(z)
            grad = None
            for _ in range(int(round(total_time / epsilon))):
                z, grad = leapfrog_step(sys, z, epsilon, grad)
                worst = max(worst, abs(sys.hamiltonian(z) - h0))
        return worst

    err_full = max_energy_error(eps)
    err_half = max_energy_error(eps / 2.0)
    assert err_half <= 0.3 * err_full


def test_leapfrog_tracks_exact_flow(std1d):
    eps = 0.01
    z = PhasePoint(np.array([1.0]), np.array([0.0]))
    z_num, grad = z, None
    worst = 0.0
    n_steps = int(round(2.0 * math.pi / eps))
    for k in range(1, n_steps + 1):
        z_num, grad = leapfrog_step(std1d, z_num, eps, grad)
        z_ref = exact_gaussian_flow(std1d, z, k * eps)
        worst = max(worst, abs(z_num.q[0] - z_ref.q[0]), abs(z_num.p[0] - z_ref.p[0]))
    assert worst < 1e-3


def test_energy_error_bounded_over_long_run():
    sys = HamiltonianSystem(GaussianModel.iid(100))
    rng = np.random.default_rng(31)
    z = PhasePoint(rng.standard_normal(100), rng.standard_normal(100))
    h0 = sys.hamiltonian(z)
    eps = 0.1
    period_steps = int(round(2.0 * math.pi / eps))
    errors = []
    grad = None
    for _ in range(10_000):
        z, grad = leapfrog_step(sys, z, eps, grad)
        errors.append(abs(sys.hamiltonian(z) - h0))
    errors = np.array(errors)
    single_period_max = errors[:period_steps].max()
    assert errors.max() <= 10.0 * single_period_max
