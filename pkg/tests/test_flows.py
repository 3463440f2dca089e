import math

import numpy as np
import pytest

from hyperlab.core.errors import ConfigError, FlowTerminationError
from hyperlab.schemas import EnsembleSpec, FlowKind, SymmetryClass
from hyperlab.services.flows import (
    characteristic_flow,
    closed_form,
    eta_crossing_time,
    flow_invariant_report,
    matrix_flow,
    rk4_flow,
    trajectory_csv,
)
from hyperlab.services.mde_core import solve_mde
from hyperlab.services.spectra import sample


def test_closed_form_is_identity_at_time_zero():
    p = solve_mde(0.3, 0.2 + 0.5j)
    z, w, m = closed_form(p.z, p.w, p.m, 0.0)
    assert (z, w, m) == (p.z, p.w, p.m)


@pytest.mark.parametrize("z,w", [(0.2, 0.3 + 0.4j), (0.5j, -0.2 + 0.6j), (0.0, 1.0j)])
def test_backward_flow_hits_its_end_point(z, w):
    traj = characteristic_flow(z, w, 0.5, "backward", points=11)
    end = traj[-1]
    assert len(traj) == 11
    assert end.t == pytest.approx(0.5)
    assert end.z_t == pytest.approx(z, abs=1e-10)
    assert end.w_t == pytest.approx(w, abs=1e-10)
    assert end.m_t == pytest.approx(solve_mde(z, w).m, abs=1e-10)


@pytest.mark.parametrize("z,w", [(0.2, 0.3 + 0.4j), (0.5j, -0.2 + 0.6j)])
def test_flow_laws_hold(z, w):
    report = flow_invariant_report(characteristic_flow(z, w, 0.5, "backward", points=21))
    assert report["m_scaling_residual"] < 1e-10
    assert report["beta_line_residual"] < 1e-10
    assert report["rk4_deviation"] < 1e-8
    assert report["eta_strictly_decreasing"] == 1.0
    assert report["eta_ratio_min"] > 0


def test_companion_point_is_transported():
    traj = characteristic_flow(0.3, 0.1 + 0.5j, 0.3, "backward", points=5, companion=(0.1, -0.2 + 0.4j))
    last = traj[-1]
    assert last.beta_hat_t <= 1.0
    report = flow_invariant_report(traj)
    assert report["beta_line_residual"] < 1e-10


def test_forward_flow_stops_before_the_real_axis():
    p = solve_mde(0.2, 0.05j)
    t_cross = eta_crossing_time(p.z, p.w, p.m)
    assert t_cross == pytest.approx(math.log1p(0.05 / p.m.imag))
    with pytest.raises(FlowTerminationError) as info:
        characteristic_flow(0.2, 0.05j, 2 * t_cross, "forward")
    assert info.value.crossing_time == pytest.approx(t_cross)
    traj = characteristic_flow(0.2, 0.05j, 0.5 * t_cross, "forward", points=5)
    assert traj[-1].eta_t > 0


def test_eta_vanishes_at_crossing_time():
    p = solve_mde(0.4, 0.1 + 0.2j)
    t = eta_crossing_time(p.z, p.w, p.m)
    _, w_t, _ = closed_form(p.z, p.w, p.m, t)
    assert abs(w_t.imag) < 1e-12


def test_flow_argument_checks():
    with pytest.raises(ConfigError):
        characteristic_flow(0.1, 0.5j, -1.0)
    with pytest.raises(ConfigError):
        characteristic_flow(0.1, 0.5, 0.2)
    with pytest.raises(ConfigError):
        characteristic_flow(0.1, 0.5j, 0.2, direction="sideways")


def test_rk4_agrees_with_closed_form():
    p = solve_mde(0.1, 0.4j)
    times = [0.1, 0.2]
    w_rk4 = rk4_flow(p.z, p.w, times, p.m)
    for t, w in zip(times, w_rk4):
        assert w == pytest.approx(closed_form(p.z, p.w, p.m, t)[1], abs=1e-9)


def test_trajectory_csv(tmp_path):
    traj = characteristic_flow(0.2, 0.5j, 0.2, points=4)
    path = trajectory_csv(traj, tmp_path / "traj.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("schema_version,t,z_t,w_t,m_t")
    assert len(lines) == 5


def test_matrix_flow_argument_checks():
    spec = EnsembleSpec(N=8)
    with pytest.raises(ConfigError):
        matrix_flow(spec, FlowKind.BROWNIAN, [0.1], dt=2e-3)
    with pytest.raises(ConfigError):
        matrix_flow(spec, FlowKind.BROWNIAN, [0.1], dt=0.0)
    with pytest.raises(ConfigError):
        matrix_flow(EnsembleSpec(N=600), FlowKind.BROWNIAN, [0.1])
    with pytest.raises(ConfigError):
        matrix_flow(spec, FlowKind.BROWNIAN, [])
    with pytest.raises(ConfigError):
        matrix_flow(spec, FlowKind.BROWNIAN, [0.1], indices=[9])


def test_noiseless_ou_contracts_exactly():
    spec = EnsembleSpec(N=10, seed=2)
    path = matrix_flow(spec, FlowKind.ORNSTEIN_UHLENBECK, [0.05, 0.1], noise=False)
    np.testing.assert_allclose(path.final, math.exp(-0.05) * sample(spec, 0), atol=1e-12)


def test_brownian_frobenius_increment_grows_linearly():
    N, t = 32, 0.05
    path = matrix_flow(EnsembleSpec(N=N, seed=4), FlowKind.BROWNIAN, [t])
    assert path.frobenius_increment[-1] == pytest.approx(t * N, rel=0.15)


def test_ou_keeps_entry_variance():
    N = 120
    path = matrix_flow(EnsembleSpec(N=N, seed=5, symmetry_class=SymmetryClass.REAL), FlowKind.ORNSTEIN_UHLENBECK, [0.1])
    assert np.isrealobj(path.final)
    assert path.entry_moments[-1, 0] == pytest.approx(1.0, abs=0.06)


def test_matrix_flow_records_tracks():
    path = matrix_flow(EnsembleSpec(N=12, seed=6), FlowKind.BROWNIAN, [0.0, 0.01, 0.02],
                       z_track=[0j, 0.3], indices=[1, 2], w_track=[0.5j])
    assert path.lambdas.shape == (3, 2, 2)
    assert path.traces.shape == (3, 2, 1)
    assert np.all(path.lambdas[:, :, 0] <= path.lambdas[:, :, 1])
    assert path.frobenius_increment[0] == 0.0


def test_matrix_flow_is_reproducible():
    spec = EnsembleSpec(N=8, seed=7)
    a = matrix_flow(spec, FlowKind.BROWNIAN, [0.01], index=3)
    b = matrix_flow(spec, FlowKind.BROWNIAN, [0.01], index=3)
    np.testing.assert_array_equal(a.final, b.final)
