import math

import numpy as np
import pytest

from hyperlab.core.errors import ConfigError, DomainError
from hyperlab.schemas import DomainShape, DomainSpec, EnsembleSpec, TestFunctionKind, TestFunctionSpec
from hyperlab.services.girko import (
    build_domain,
    build_test_function,
    direct_statistic,
    envelopes,
    gaussian_bump,
    girko_evaluate,
    integrate_over_plane,
    laplacian_l1,
    mollifier,
    mollify,
    z_quadrature,
)
from hyperlab.services.spectra import Spectrum, complex_spectrum, sample


def _random_points(n, radius=0.9, seed=3):
    rng = np.random.default_rng(seed)
    return radius * np.sqrt(rng.random(n)) * np.exp(2j * np.pi * rng.random(n))


def test_domain_scaling_and_area():
    dom = build_domain(DomainSpec(radius=0.5, alpha=0.25), 16)
    assert dom.radius == pytest.approx(0.25)
    assert dom.area == pytest.approx(math.pi * 0.25 ** 2)
    rect = build_domain(DomainSpec(shape=DomainShape.RECTANGLE, width=0.6, height=0.4), 64)
    assert rect.area == pytest.approx(0.24)
    assert rect.inradius == pytest.approx(0.2)


def test_shape_indicators():
    sector = build_domain(DomainSpec(shape=DomainShape.ANNULUS_SECTOR), 64)
    pts = np.array([0.4 * np.exp(0.7j), 0.4 * np.exp(2.0j), 0.1 + 0j])
    np.testing.assert_array_equal(sector.indicator(pts), [1.0, 0.0, 0.0])

    clipped = build_domain(DomainSpec(shape=DomainShape.HALF_PLANE_CLIPPED_DISK, radius=0.5, clip_offset=0.2), 64)
    pts = np.array([0.3 + 0j, -0.3 + 0j, 0.1j])
    np.testing.assert_array_equal(clipped.indicator(pts), [0.0, 1.0, 1.0])


def test_clipping_everything_is_rejected():
    with pytest.raises(DomainError):
        build_domain(DomainSpec(shape=DomainShape.HALF_PLANE_CLIPPED_DISK, radius=0.5, clip_offset=-1.0), 64)


def test_mollifier_has_unit_mass():
    eps = 0.1
    n = 400
    ax = (np.arange(n) + 0.5) / n * 2 * eps - eps
    X, Y = np.meshgrid(ax, ax)
    total = mollifier(X + 1j * Y, eps).sum() * (2 * eps / n) ** 2
    assert total == pytest.approx(1.0, rel=1e-3)


@pytest.mark.parametrize("shape", [DomainShape.DISK, DomainShape.RECTANGLE])
def test_envelopes_sandwich_indicator(shape):
    N = 64
    dom = build_domain(DomainSpec(shape=shape), N)
    lo, hi = envelopes(dom, 0.6, N)
    zs = _random_points(2000)
    ind = dom.indicator(zs)
    assert np.all(lo.value(zs) <= ind)
    assert np.all(ind <= hi.value(zs))


def test_envelope_needs_room():
    dom = build_domain(DomainSpec(radius=0.05), 64)
    with pytest.raises(DomainError):
        envelopes(dom, 0.6, 64)


def test_mollify_argument_checks():
    dom = build_domain(DomainSpec(), 64)
    with pytest.raises(ConfigError):
        mollify(dom, 0.6, 64, grid_points=4)
    with pytest.raises(ConfigError):
        mollify(dom, -0.1, 64)
    with pytest.raises(ConfigError):
        build_test_function(TestFunctionSpec(), None, 64)


def test_mollified_disk_keeps_its_area():
    dom = build_domain(DomainSpec(radius=0.4), 64)
    f = mollify(dom, 0.6, 64)
    assert integrate_over_plane(f) == pytest.approx(math.pi * 0.16, rel=1e-4)
    assert f.value(np.array([0j]))[0] == pytest.approx(1.0)
    assert f.value(np.array([0.9 + 0j]))[0] == 0.0


def test_build_test_function_kinds():
    bump = build_test_function(TestFunctionSpec(kind=TestFunctionKind.GAUSSIAN_BUMP, width=0.2), None, 64)
    assert bump.value(np.array([0j]))[0] == pytest.approx(1.0)
    moll = build_test_function(TestFunctionSpec(a=0.5), build_domain(DomainSpec(), 64), 64)
    assert moll.eps == pytest.approx(64 ** -0.5)


def test_gaussian_bump_laplacian_integrates_to_zero():
    f = gaussian_bump(width=0.1)
    nodes, weights = z_quadrature(f)
    assert abs(np.sum(f.laplacian(nodes) * weights)) < 2e-3 * laplacian_l1(f)


def test_direct_statistic_sums_values():
    f = gaussian_bump(width=0.1)
    spectrum = Spectrum(sigmas=np.array([0j, 0.9 + 0j, 0.1 + 0j]))
    assert direct_statistic(spectrum, f) == pytest.approx(1.0 + math.exp(-0.5), abs=1e-12)


def test_girko_regimes_sum_to_log_determinant():
    N = 8
    X = sample(EnsembleSpec(N=N, seed=11))
    f = mollify(build_domain(DomainSpec(radius=0.5), N), 0.6, N)
    regimes = (N ** -10.0, N ** -1.05, N ** -0.9, float(N) ** 3)
    br = girko_evaluate(X, f, regimes, refine=2)
    assert abs(br.total - br.closed_form) <= 1e-8 * max(1.0, abs(br.closed_form))
    assert set(br.pieces) == {"J_T", "I_0^eta_L", "I_eta_L^eta_0", "I_eta_0^eta_c", "I_eta_c^T"}
    assert br.total == pytest.approx(direct_statistic(complex_spectrum(X), f), abs=0.1)


def test_girko_rejects_misordered_regimes():
    X = sample(EnsembleSpec(N=4))
    f = gaussian_bump()
    with pytest.raises(ConfigError):
        girko_evaluate(X, f, (1e-3, 1e-4, 1e-2, 10.0))
