import dataclasses

from hyperlab.services import selftest as st
from hyperlab.services.mde_core import solve_mde


def _skewed(z, w):
    p = solve_mde(z, w)
    return dataclasses.replace(p, m=1.01 * p.m)


def test_mde_check_catches_a_wrong_solver():
    assert st.check_mde_residual(solve_mde).passed
    bad = st.check_mde_residual(_skewed)
    assert not bad.passed
    assert bad.residual > 1e-6


def test_individual_identity_checks_pass():
    for check in (
        st.check_density_at_zero(),
        st.check_w_derivatives(solve_mde),
        st.check_v12(),
        st.check_stability_spectrum(),
        st.check_flow_laws(),
    ):
        assert check.passed, (check.name, check.residual, check.detail)


def test_e_minus_identities_on_small_matrices():
    check = st.check_e_minus_identities(N=8, seeds=1)
    assert check.passed, check.residual


def test_suite_reports_every_check():
    report = st.selftest()
    names = [c.name for c in report.checks]
    assert names == [
        "mde_residual",
        "density_at_zero",
        "w_derivatives",
        "v12_derivative",
        "stability_spectrum",
        "e_minus_identities",
        "girko_identity",
        "flow_laws",
        "envelope_ordering",
    ]
    assert report.passed, [(c.name, c.residual) for c in report.failures]


def test_cli_selftest_exit_code_follows_the_report(out_dir, monkeypatch):
    from hyperlab import cli
    from hyperlab.services import pipeline

    monkeypatch.setattr(pipeline, "selftest", lambda: st.selftest(solve=_skewed))
    assert cli.main(["selftest", "--out", str(out_dir)]) == 1
