import math

import numpy as np
import pytest

from hyperlab.core.errors import ConfigError, InsufficientSamplesError
from hyperlab.schemas import DomainSpec, EnsembleSpec, FlowKind
from hyperlab.services import experiments, stats
from hyperlab.services.det_chains import cov_predict, m_chain, vf_functional
from hyperlab.services.girko import gaussian_bump
from hyperlab.services.stability import E_PLUS

DISK = DomainSpec(radius=0.5)


def test_number_variance_counts_quarter_of_spectrum():
    res = experiments.number_variance(DISK, EnsembleSpec(seed=1), [8, 12, 16, 24], samples=40, min_samples=10)
    assert res.experiment == "numvar"
    assert [c["N"] for c in res.cells] == [8, 12, 16, 24]
    assert list(res.cells[0])[:5] == ["N", "mean", "var", "se", "exponent"]
    for cell in res.cells:
        assert cell["mean"] == pytest.approx(cell["N"] / 4, rel=0.2)
        assert cell["ci_low"] <= cell["var"] <= cell["ci_high"]
    assert res.fits["variance_exponent_all"].points == 4
    assert "smallest_N_dropped" in res.diagnostics


def test_running_exponent_follows_prefix_fits():
    res = experiments.number_variance(DISK, EnsembleSpec(seed=1), [8, 12, 16, 24], samples=40, min_samples=10)
    assert res.cells[0]["exponent"] is None
    assert res.cells[1]["exponent"] is None
    Ns = [c["N"] for c in res.cells[:3]]
    prefix = stats.exponent_fit(Ns, [c["var"] for c in res.cells[:3]], [c["se"] for c in res.cells[:3]])
    assert res.cells[2]["exponent"] == pytest.approx(prefix.slope)
    assert res.cells[3]["exponent"] == pytest.approx(res.fits["variance_exponent_all"].slope)


def test_straddles_volume_law():
    assert experiments._straddles_volume_law({"ci_low": 1.0, "ci_high": 3.0, "volume_law": 2.0})
    assert not experiments._straddles_volume_law({"ci_low": 1.0, "ci_high": 3.0, "volume_law": 8.0})
    assert not experiments._straddles_volume_law({"ci_low": 1.0, "ci_high": 3.0, "volume_law": 0.5})


def test_smallest_N_dropped_when_its_ci_straddles_volume_law(monkeypatch):
    monkeypatch.setattr(experiments, "_straddles_volume_law", lambda cell: cell["N"] == 8)
    res = experiments.number_variance(DISK, EnsembleSpec(seed=1), [8, 12, 16, 24], samples=40, min_samples=10)
    assert res.diagnostics["smallest_N_dropped"]
    assert res.fits["variance_exponent"].points == 3
    assert res.fits["variance_exponent_all"].points == 4


def test_all_N_kept_when_smallest_ci_misses_volume_law(monkeypatch):
    monkeypatch.setattr(experiments, "_straddles_volume_law", lambda cell: False)
    res = experiments.number_variance(DISK, EnsembleSpec(seed=1), [8, 12, 16, 24], samples=40, min_samples=10)
    assert not res.diagnostics["smallest_N_dropped"]
    assert res.fits["variance_exponent"].points == 4
    assert res.fits["variance_exponent"] == res.fits["variance_exponent_all"]


def test_straddling_point_kept_when_too_few_N_remain(monkeypatch):
    monkeypatch.setattr(experiments, "_straddles_volume_law", lambda cell: True)
    res = experiments.number_variance(DISK, EnsembleSpec(seed=1), [8, 12, 16], samples=40, min_samples=10)
    assert not res.diagnostics["smallest_N_dropped"]
    assert res.fits["variance_exponent"].points == 3
    assert any("straddles the volume law" in w for w in res.warnings)


def test_uniform_control_matches_binomial_variance():
    res = experiments.number_variance(DISK, EnsembleSpec(seed=2), [16, 32, 64], samples=400, control=True)
    assert res.experiment == "numvar-control"
    for cell in res.cells:
        assert cell["binomial_variance"] == pytest.approx(cell["N"] * 0.25 * 0.75)
        assert cell["var"] == pytest.approx(cell["binomial_variance"], rel=0.3)
    assert res.fits["variance_exponent"].slope == pytest.approx(1.0, abs=0.3)


def test_number_variance_guards():
    with pytest.raises(InsufficientSamplesError):
        experiments.number_variance(DISK, EnsembleSpec(), [8], samples=50)
    with pytest.raises(ConfigError):
        experiments.number_variance(DISK, EnsembleSpec(), [16, 8], samples=10, min_samples=2)


def test_results_do_not_depend_on_worker_count():
    spec = EnsembleSpec(seed=3)
    one = experiments.number_variance(DISK, spec, [8, 12, 16], samples=12, workers=1, min_samples=2)
    two = experiments.number_variance(DISK, spec, [8, 12, 16], samples=12, workers=2, min_samples=2)
    assert one.cells == two.cells


def test_trace_covariance_reports_prediction():
    spec = EnsembleSpec(N=8, seed=4)
    res = experiments.trace_covariance(0.2, -0.2, 0.3j, 0.3j, spec, samples=60, min_samples=10)
    cell = res.cells[0]
    assert cell["predicted"] == pytest.approx(cov_predict(0.2, -0.2, 0.3j, 0.3j, 0.0, "complex", 8).value)
    assert cell["se"] > 0
    assert math.isfinite(cell["z_score"])
    assert res.diagnostics["required_samples"] > 0
    assert res.estimates[0].name == "var_im_g1"


def test_trace_covariance_needs_samples():
    with pytest.raises(InsufficientSamplesError):
        experiments.trace_covariance(0.2, -0.2, 0.3j, 0.3j, EnsembleSpec(N=8), samples=100)


def test_required_samples_grows_with_separation():
    spec = EnsembleSpec(N=64)
    near = experiments.required_samples(0.1, 0.0, 0.3j, 0.3j, spec)
    far = experiments.required_samples(0.6, -0.6, 0.3j, 0.3j, spec)
    assert 0 < near < far


def test_rigidity_cells_and_tracking():
    res = experiments.rigidity(0.0, EnsembleSpec(seed=5), [8, 16], samples=6, tracked=(2,), min_samples=2)
    assert [c["N"] for c in res.cells] == [8, 16]
    for cell in res.cells:
        assert 0 <= cell["median"] <= cell["p95"]
        assert cell["edge"] == pytest.approx(2.0)
        assert "z_gamma_2" in cell
    assert len(res.estimates) == 2
    with pytest.raises(ConfigError):
        experiments.rigidity(0.95, EnsembleSpec(), [8], samples=2, min_samples=2)


def test_rigidity_needs_samples():
    with pytest.raises(InsufficientSamplesError) as info:
        experiments.rigidity(0.0, EnsembleSpec(), [8], samples=1)
    assert info.value.exit_code == 2
    assert isinstance(info.value, ConfigError)


def test_smallest_singular_value_tail():
    res = experiments.smallest_eig_tail(0.0, EnsembleSpec(N=8, seed=6), samples=200, x_grid=[0.1, 0.3, 1.0, 3.0],
                                        min_samples=10)
    assert res.diagnostics["monotone"]
    probs = [c["probability"] for c in res.cells]
    assert probs[-1] > 0.9
    assert res.cells[0]["ginibre_reference"] == pytest.approx(-math.expm1(-0.01))


def test_overlap_decay_cells():
    res = experiments.overlap_decay([(0.0, 0.3)], [(2, 2), (2, 4)], EnsembleSpec(N=16, seed=7), samples=5)
    assert len(res.cells) == 2
    assert all(math.isfinite(c["mean"]) for c in res.cells)
    assert res.cells[0]["reference"] == pytest.approx(1 / 0.09)
    with pytest.raises(ConfigError):
        experiments.overlap_decay([(0.0, 0.95)], [(2, 2)], EnsembleSpec(N=16), samples=2)


@pytest.mark.parametrize("pair", [(15, 15), (2, 15), (0, 2)])
def test_overlap_decay_rejects_indices_outside_bulk(pair):
    # N=16 keeps indices 1..14
    with pytest.raises(ConfigError, match="bulk range 1..14"):
        experiments.overlap_decay([(0.0, 0.3)], [pair], EnsembleSpec(N=16, seed=7), samples=2)


def test_dbm_identical_points_are_fully_correlated():
    res = experiments.dbm_decorrelation(0.0, [0.0, 0.5], [0.2], EnsembleSpec(N=8, seed=8), samples=30,
                                        kind=FlowKind.BROWNIAN, min_samples=10)
    same, apart = res.cells
    assert same["correlation"] == pytest.approx(1.0, abs=1e-12)
    assert apart["correlation"] < 1.0
    assert apart["distance"] == pytest.approx(0.5)


def test_dbm_needs_samples():
    with pytest.raises(InsufficientSamplesError):
        experiments.dbm_decorrelation(0.0, 0.5, [0.2], EnsembleSpec(N=8), samples=10)


@pytest.mark.parametrize("t_grid", [[0.01, 0.2], [0.2, 1.5], []])
def test_dbm_rejects_times_outside_unit_window(t_grid):
    with pytest.raises(ConfigError):
        experiments.dbm_decorrelation(0.0, 0.5, t_grid, EnsembleSpec(N=8), samples=10, min_samples=2)


def test_dbm_accepts_window_endpoints():
    res = experiments.dbm_decorrelation(0.0, 0.5, [0.125, 1.0], EnsembleSpec(N=8, seed=8), samples=4, min_samples=2)
    assert [c["t"] for c in res.cells] == [0.125, 1.0]


def test_linear_statistic_variance_near_prediction():
    f = gaussian_bump(width=0.3)
    res = experiments.linear_statistic_variance(f, EnsembleSpec(N=16, seed=9), samples=100)
    cell = res.cells[0]
    assert cell["predicted"] == pytest.approx(vf_functional(f))
    # V_f weights the gradient energy by 1/(4 pi^2); sampled variances sit near pi V_f
    assert 0.3 * cell["predicted"] < cell["variance"] < 6.0 * cell["predicted"]


@pytest.mark.parametrize("seed", [10, 11])
def test_portmanteau_bound_holds(seed):
    res = experiments.portmanteau_check(DISK, EnsembleSpec(N=16, seed=seed), samples=20, a=0.6)
    cell = res.cells[0]
    assert res.diagnostics["pathwise_ordering"]
    bound = 2.0 * (cell["var_plus"] + cell["var_minus"] + cell["mean_gap"] ** 2)
    assert cell["bound"] == pytest.approx(bound)
    assert cell["var_count"] <= bound
    assert cell["holds"]


def test_averaged_local_law_error_is_small():
    res = experiments.averaged_local_law(0.0, [0.1, 0.5], EnsembleSpec(N=32, seed=11), samples=5)
    assert [c["eta"] for c in res.cells] == [0.1, 0.5]
    assert res.cells[1]["mean_error"] < 0.1
    assert all(np.isfinite(c["ratio"]) for c in res.cells)


def test_chain_agreement_with_deterministic_chain():
    spec = EnsembleSpec(N=32, seed=12)
    res = experiments.chain_agreement(0.2, 0.2, 0.5j, 0.6j, E_PLUS, E_PLUS, spec, samples=10)
    cell = res.cells[0]
    det = m_chain([(0.2, 0.5j), (0.2, 0.6j)], [E_PLUS]).trace_with(E_PLUS)
    assert cell["deterministic"] == pytest.approx(det)
    assert cell["difference"] < 0.05 + 0.1 * abs(det)
