import math

import numpy as np
import pytest

from hyperlab.core.errors import ConfigError
from hyperlab.services.det_chains import (
    a_matrix,
    cov_predict,
    deterministic_e_minus_chain,
    deterministic_power_trace,
    e_minus_identity_rhs,
    kappa4_for,
    m12,
    m_chain,
    stability_inverse,
    u_term,
    v12,
    v12_fd,
    vf_functional,
    vf_grid_oracle,
)
from hyperlab.services.girko import gaussian_bump
from hyperlab.services.mde_core import derivatives, solve_mde
from hyperlab.services.stability import E_PLUS, F, apply_operator, solve_point


@pytest.mark.parametrize(
    "cls,law,expected",
    [
        ("complex", "gaussian", 0.0),
        ("real", "gaussian", 0.0),
        ("complex", "bernoulli", -1.0),
        ("real", "bernoulli", -2.0),
        ("complex", "uniform", -0.6),
        ("real", "uniform", -1.2),
    ],
)
def test_kappa4_registry(cls, law, expected):
    assert kappa4_for(cls, law) == pytest.approx(expected)


def test_kappa4_custom_and_mixing():
    assert kappa4_for("complex", "custom", mu4=5.0) == pytest.approx(3.0)
    assert kappa4_for("real", "bernoulli", gauss_mixing=0.5) == pytest.approx(-2.0 * 0.75 ** 2)
    with pytest.raises(ConfigError):
        kappa4_for("complex", "custom")
    with pytest.raises(ConfigError):
        kappa4_for("complex", "cauchy")
    with pytest.raises(ConfigError):
        kappa4_for("quaternion", "gaussian")


def test_stability_inverse_solves_operator_equation():
    p1, p2 = solve_point(0.2, 0.1 + 0.3j), solve_point(-0.3j, 0.4j)
    R = np.array([[1.0, 0.5j], [-0.25, 2.0 - 1j]])
    X = stability_inverse(R, p1.M, p2.M)
    np.testing.assert_allclose(apply_operator(X, p1.M, p2.M), R, atol=1e-12)


def test_chain_of_one_is_m():
    p = solve_mde(0.4, 0.2 + 0.3j)
    np.testing.assert_allclose(m_chain([(0.4, 0.2 + 0.3j)], []).value, p.M)


def test_chain_argument_checks():
    with pytest.raises(ConfigError):
        m_chain([], [])
    with pytest.raises(ConfigError):
        m_chain([(0.1, 0.2j), (0.1, 0.3j)], [])
    with pytest.raises(ConfigError):
        m_chain([(0.1, 0.2j)] * 7, [E_PLUS] * 6)


def test_two_chain_obeys_resolvent_identity():
    z, w1, w2 = 0.3, 0.1 + 0.3j, -0.2 + 0.5j
    chain = m_chain([(z, w1), (z, w2)], [E_PLUS]).trace_with(E_PLUS)
    expected = (solve_mde(z, w1).m - solve_mde(z, w2).m) / (w1 - w2)
    assert abs(chain - expected) <= 1e-9 * abs(expected)


def test_power_trace_two_is_w_derivative():
    z, w = 0.5j, 0.2 + 0.4j
    dm, _ = derivatives(solve_mde(z, w))
    assert abs(deterministic_power_trace(z, w, 2) - dm) <= 1e-9 * abs(dm)
    assert deterministic_power_trace(z, w, 1) == pytest.approx(solve_mde(z, w).m)


def test_m12_matches_chain():
    args = (0.2, -0.1, 0.3j, 0.1 + 0.2j)
    direct = m12(F, *args)
    chain = m_chain([(args[0], args[2]), (args[1], args[3])], [F]).value
    np.testing.assert_allclose(direct, chain, atol=1e-12)


def test_e_minus_chains():
    z, w = 0.3 + 0.2j, 0.1 + 0.4j
    powers = [deterministic_power_trace(z, w, s + 1) for s in range(2)]
    for n in (1, 2):
        lhs = deterministic_e_minus_chain(z, w, 2 * n)
        rhs = e_minus_identity_rhs(powers, n, w)
        assert abs(lhs - rhs) <= 1e-9 * abs(rhs)
    assert abs(deterministic_e_minus_chain(z, w, 3)) < 1e-9


def test_e_minus_rhs_argument_checks():
    with pytest.raises(ConfigError):
        e_minus_identity_rhs([1.0], 0, 1j)
    with pytest.raises(ConfigError):
        e_minus_identity_rhs([1.0], 2, 1j)


@pytest.mark.parametrize(
    "z1,z2,w1,w2",
    [(0.2, -0.3, 0.3j, 0.3j), (0.1j, 0.5, 0.2 + 0.4j, -0.1 + 0.3j), (0.0, 0.4, 0.5j, -0.5j)],
)
def test_v12_matches_log_determinant_differences(z1, z2, w1, w2):
    exact = v12(z1, z2, w1, w2)
    fd = v12_fd(z1, z2, w1, w2, step=1e-4)
    assert abs(exact - fd) <= 1e-6 * abs(exact)


def test_cov_predict_scaling_and_classes():
    args = (0.3, -0.2, 0.3j, 0.3j)
    p64 = cov_predict(*args, kappa4=0.0, N=64)
    p128 = cov_predict(*args, kappa4=0.0, N=128)
    assert p64.value == pytest.approx(4.0 * p128.value)
    assert p64.value == pytest.approx(v12(*args) / (2 * 64 ** 2))

    real = cov_predict(0.3, -0.2 + 0.1j, 0.3j, 0.3j, kappa4=0.0, symmetry_class="real", N=64)
    assert real.V12 == pytest.approx(v12(0.3, -0.2 + 0.1j, 0.3j, 0.3j) + v12(0.3, -0.2 - 0.1j, 0.3j, 0.3j))

    k = cov_predict(*args, kappa4=-1.0, N=64)
    assert k.U1 == pytest.approx(u_term(0.3, 0.3j))
    assert k.value == pytest.approx((k.V12 - k.U1 * k.U2) / (2 * 64 ** 2))


def test_cov_predict_rejects_bad_input():
    with pytest.raises(ConfigError):
        cov_predict(0.1, 0.2, 0.3j, 0.3j, N=0)
    with pytest.raises(ConfigError):
        cov_predict(0.1, 0.2, 0.3j, 0.3j, symmetry_class="other")


def test_vf_of_gaussian_bump():
    f = gaussian_bump(width=0.15)
    assert vf_functional(f) == pytest.approx(1.0 / (4 * math.pi), rel=1e-6)
    gap = (2 * 0.15 ** 2) ** 2
    assert vf_functional(f, kappa4=1.0) - vf_functional(f) == pytest.approx(gap, rel=1e-5)


def test_vf_grid_oracle_agrees():
    f = gaussian_bump(center=0.2 + 0.1j, width=0.2)
    assert vf_grid_oracle(f, kappa4=-1.0) == pytest.approx(vf_functional(f, kappa4=-1.0), rel=1e-3)


def test_a_matrix_traces_to_w_derivative():
    p = solve_mde(0.3 + 0.1j, 0.2 + 0.4j)
    A = a_matrix(p)
    assert np.trace(A @ p.M) / 2 == pytest.approx(derivatives(p)[0], rel=1e-12)
