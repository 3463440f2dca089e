import math

import numpy as np
import pytest

from hyperlab.core.errors import ConfigError, DomainError
from hyperlab.services.mde_core import (
    bulk_intervals,
    check_bulk_z,
    cumulative_density,
    density,
    density_array,
    density_profile,
    derivatives,
    directional_z_derivative,
    edge,
    in_bulk,
    m_derivative_fd,
    mde_residual,
    quantiles,
    solve_grid,
    solve_mde,
    z_derivative_fd,
)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def test_solution_at_origin_is_golden_ratio():
    p = solve_mde(0.0, 1j)
    assert p.m == pytest.approx(1j * GOLDEN, abs=1e-12)
    assert p.residual() < 1e-12
    assert p.u == pytest.approx(p.m / (p.w + p.m))


@pytest.mark.parametrize("z", [0.0, 0.3, 0.5 + 0.5j, 0.9j])
@pytest.mark.parametrize("w", [1e-3j, 0.2 + 0.05j, -1.1 + 0.4j, 3.0 + 2.0j])
def test_solver_stays_on_physical_branch(z, w):
    p = solve_mde(z, w)
    assert p.m.imag > 0
    assert mde_residual(p.m, z, w) < 1e-12


def test_lower_half_plane_is_conjugate():
    up = solve_mde(0.4, 0.3 + 0.2j)
    down = solve_mde(0.4, 0.3 - 0.2j)
    assert down.m == pytest.approx(up.m.conjugate(), abs=1e-13)
    assert down.u == pytest.approx(up.u.conjugate(), abs=1e-13)


def test_real_w_requires_boundary_flag():
    with pytest.raises(ConfigError):
        solve_mde(0.2, 0.5)
    p = solve_mde(0.2, 0.5, boundary=True)
    assert p.boundary
    assert p.m.imag >= 0


@pytest.mark.parametrize("z", [0.0, 0.3, 0.6, 0.8j])
def test_density_at_zero_energy(z):
    assert density(z, 0.0) == pytest.approx(math.sqrt(1 - abs(z) ** 2) / math.pi, abs=1e-10)


def test_semicircle_at_origin():
    E = np.array([0.0, 0.5, 1.0, 1.5])
    expected = np.sqrt(4 - E ** 2) / (2 * np.pi)
    np.testing.assert_allclose(density_array(0.0, E), expected, atol=1e-10)
    assert edge(0.0) == pytest.approx(2.0, abs=1e-12)
    assert density(0.0, 2.5) == 0.0


def test_edge_shrinks_support_mass_is_half():
    for z in (0.0, 0.5, 0.8):
        e = edge(z)
        assert density(z, 0.999 * e) > 0
        assert density(z, 1.001 * e) == 0.0
        assert cumulative_density(z, e) == pytest.approx(0.5, abs=1e-8)


def test_w_derivatives_match_finite_differences():
    for z, w in ((0.0, 0.3j), (0.4, 0.2 + 0.5j), (0.7j, 1.0 + 0.1j)):
        dm, du = derivatives(solve_mde(z, w))
        fm, fu = m_derivative_fd(z, w)
        assert abs(dm - fm) <= 1e-6 * abs(fm)
        assert abs(du - fu) <= 1e-6 * max(abs(fu), 1e-12)


def test_directional_z_derivative_matches_finite_differences():
    z, w, zeta = 0.3 + 0.1j, 0.1 + 0.4j, 1j
    exact = directional_z_derivative(solve_mde(z, w), zeta)
    fd = z_derivative_fd(z, w, zeta)
    assert abs(exact - fd) <= 1e-6 * max(abs(fd), 1e-8)


def test_bulk_guard():
    check_bulk_z(0.9)
    with pytest.raises(DomainError):
        check_bulk_z(0.99)
    with pytest.raises(DomainError):
        quantiles(0.97, 16)


def test_bulk_intervals_of_semicircle():
    kappa = 0.1
    intervals = bulk_intervals(0.0, kappa)
    assert len(intervals) == 1
    lo, hi = intervals[0]
    bound = math.sqrt(4 - (2 * math.pi * kappa) ** 2)
    assert lo == pytest.approx(-bound, abs=1e-8)
    assert hi == pytest.approx(bound, abs=1e-8)
    assert in_bulk(0.0, 1.0, kappa)
    assert not in_bulk(0.0, 1.95, kappa)


def test_quantiles_are_ascending_and_end_at_edge():
    N = 64
    g = quantiles(0.0, N)
    assert g.shape == (N,)
    assert np.all(np.diff(g) > 0)
    assert g[-1] == pytest.approx(2.0, abs=1e-12)
    assert g[0] == pytest.approx(math.pi / (2 * N), rel=1e-3)


def test_quantiles_hit_their_mass():
    z, N = 0.5, 20
    g = quantiles(z, N)
    for i in (1, 7, 13, 19):
        assert cumulative_density(z, g[i - 1]) == pytest.approx(i / (2 * N), abs=1e-10)


def test_quantiles_reject_bad_size():
    with pytest.raises(ConfigError):
        quantiles(0.0, 0)


def test_solve_grid_covers_product():
    pts = solve_grid([0.0, 0.5], [0.1j, 0.5j, 1j])
    assert len(pts) == 6
    assert all(p.residual() < 1e-12 for p in pts)


def test_density_profile_bundles_the_scalar_functions():
    profile = density_profile(0.4)
    assert profile.rho_at(0.0) == pytest.approx(math.sqrt(1 - 0.16) / math.pi, rel=1e-10)
    assert profile.edge == pytest.approx(edge(0.4))
    np.testing.assert_allclose(profile.quantiles(10), quantiles(0.4, 10))
    assert profile.bulk(0.1) == bulk_intervals(0.4, 0.1)
