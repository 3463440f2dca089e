"""
Exact-identity suite behind `hyperlab selftest`.

Every check recomputes its own residual from the objects it is handed, so a
solver passed through the ``solve`` hook cannot vouch for itself.
"""

from __future__ import annotations

import logging
import math
import time
from typing import Callable, List

import numpy as np

from hyperlab.core.errors import NumericalError
from hyperlab.schemas import CheckResult, DomainShape, DomainSpec, EnsembleSpec, SelftestReport
from hyperlab.services.det_chains import (
    deterministic_e_minus_chain,
    deterministic_power_trace,
    e_minus_identity_rhs,
    v12,
    v12_fd,
)
from hyperlab.services.flows import characteristic_flow, flow_invariant_report
from hyperlab.services.girko import build_domain, direct_statistic, envelopes, girko_evaluate, mollify
from hyperlab.services.mde_core import MdePoint, density, derivatives, m_derivative_fd, mde_residual, solve_mde
from hyperlab.services.spectra import complex_spectrum, resolvent_dense, resolvent_power_trace, sample, svd_data
from hyperlab.services.stability import E_MINUS, eigenvalue_mismatch, stability_state

LOG = logging.getLogger("hyperlab.selftest")

Solver = Callable[[complex, complex], MdePoint]


def _grid_points(n_z: int = 6, n_eta: int = 6):
    zs = [r * np.exp(1j * th) for r in np.linspace(0.0, 0.9, n_z) for th in (0.0, 1.1)]
    ws = [complex(E, eta) for E in (0.0, 0.4, 1.5) for eta in np.geomspace(1e-3, 10.0, n_eta)]
    return zs, ws


def _check(name: str, reference: str, residual: float, tolerance: float, detail: str = "") -> CheckResult:
    passed = bool(np.isfinite(residual) and residual <= tolerance)
    return CheckResult(name=name, reference=reference, passed=passed, residual=float(residual),
                       tolerance=tolerance, detail=detail)


# ---------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------
def check_mde_residual(solve: Solver) -> CheckResult:
    zs, ws = _grid_points()
    worst, branch_ok = 0.0, True
    for z in zs:
        for w in ws:
            p = solve(z, w)
            worst = max(worst, mde_residual(p.m, z, w))
            branch_ok = branch_ok and p.m.imag > 0
    detail = "" if branch_ok else "a root left the upper half plane"
    return _check("mde_residual", "-1/m = w + m - |z|^2/(w + m), Im m > 0",
                  worst if branch_ok else math.inf, 1e-12, detail)


def check_density_at_zero() -> CheckResult:
    worst = max(abs(density(z, 0.0) - math.sqrt(1 - abs(z) ** 2) / math.pi) for z in (0.0, 0.3, 0.6, 0.9j))
    return _check("density_at_zero", "rho^z(0) = sqrt(1 - |z|^2) / pi", worst, 1e-10)


def check_w_derivatives(solve: Solver) -> CheckResult:
    worst = 0.0
    for z in (0.0, 0.4, 0.7j):
        for w in (0.3j, 0.2 + 0.5j, 1.0 + 0.1j):
            dm, du = derivatives(solve(z, w))
            fm, fu = m_derivative_fd(z, w)
            worst = max(worst, abs(dm - fm) / abs(fm), abs(du - fu) / max(abs(fu), 1e-12))
    return _check("w_derivatives", "dm/dw = <M^2>/(1 - <M^2>), du/dw = 2mu/(1 - <M^2>)", worst, 1e-6)


def check_v12() -> CheckResult:
    worst = 0.0
    for z1, z2, w1, w2 in ((0.2, -0.3, 0.3j, 0.3j), (0.1j, 0.5, 0.2 + 0.4j, -0.1 + 0.3j), (0.0, 0.4, 0.5j, -0.5j)):
        exact = v12(z1, z2, w1, w2)
        fd = v12_fd(z1, z2, w1, w2, step=1e-4)
        worst = max(worst, abs(exact - fd) / abs(exact))
    return _check("v12_derivative", "V12 = -1/2 d_w1 d_w2 log D", worst, 1e-6)


def check_stability_spectrum() -> CheckResult:
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        z1, z2 = [0.8 * math.sqrt(rng.random()) * np.exp(2j * np.pi * rng.random()) for _ in range(2)]
        w1, w2 = [complex(rng.uniform(-0.5, 0.5), rng.uniform(0.05, 1.0)) for _ in range(2)]
        worst = max(worst, eigenvalue_mismatch(stability_state(z1, z2, w1, w2)))
    return _check("stability_spectrum", "spec B12 = {beta+, beta-, 1, 1}", worst, 1e-9)


def check_e_minus_identities(N: int = 32, seeds: int = 3) -> CheckResult:
    z, w = 0.3 + 0.2j, 0.1 + 0.4j
    worst = 0.0
    for seed in range(seeds):
        X = sample(EnsembleSpec(N=N, seed=seed))
        GE = resolvent_dense(X, z, w) @ np.kron(E_MINUS, np.eye(N))
        data = svd_data(X, z, vectors=False)
        powers = [resolvent_power_trace(data, w, s + 1) for s in range(4)]
        P = np.eye(2 * N, dtype=complex)
        for k in range(1, 9):
            P = P @ GE
            tr = np.trace(P) / (2 * N)
            if k % 2:
                worst = max(worst, abs(tr) / max(abs(powers[0]), 1e-12))
            else:
                rhs = e_minus_identity_rhs(powers, k // 2, w)
                worst = max(worst, abs(tr - rhs) / max(abs(rhs), 1e-12))
    det_powers = [deterministic_power_trace(z, w, s + 1) for s in range(2)]
    for n in (1, 2):
        det = deterministic_e_minus_chain(z, w, 2 * n)
        rhs = e_minus_identity_rhs(det_powers, n, w)
        worst = max(worst, abs(det - rhs) / max(abs(rhs), 1e-12))
    worst = max(worst, abs(deterministic_e_minus_chain(z, w, 3)))
    return _check("e_minus_identities", "<(G E-)^odd> = 0 and <(G E-)^2n> through <G^s>", worst, 1e-9)


def check_girko_identity(N: int = 16) -> CheckResult:
    spec = EnsembleSpec(N=N, seed=11)
    X = sample(spec)
    f = mollify(build_domain(DomainSpec(shape=DomainShape.DISK, radius=0.5), N), 0.6, N)
    regimes = (float(N) ** -10, float(N) ** -1.05, float(N) ** -0.9, float(N) ** 3)
    br = girko_evaluate(X, f, regimes, refine=2)
    direct = direct_statistic(complex_spectrum(X), f)
    split = abs(br.total - br.closed_form) / max(1.0, abs(br.closed_form))
    quad = abs(br.total - direct)
    detail = f"total {br.total:.6g}, direct {direct:.6g}, regime split residual {split:.2e}"
    return _check("girko_identity", "Girko regime split sums to sum_i f(sigma_i)",
                  quad if split <= 1e-8 else math.inf, 1e-3 * N, detail)


def check_flow_laws() -> CheckResult:
    worst_rk4 = worst_alg = 0.0
    for z, w in ((0.2, 0.3 + 0.4j), (0.5j, -0.2 + 0.6j), (0.0, 1.0j)):
        report = flow_invariant_report(characteristic_flow(z, w, 0.5, "backward", points=21))
        worst_rk4 = max(worst_rk4, report["rk4_deviation"])
        worst_alg = max(worst_alg, report["m_scaling_residual"], report["beta_line_residual"])
    detail = f"rk4 {worst_rk4:.2e}, algebraic {worst_alg:.2e}"
    return _check("flow_laws", "M^{z_t}(w_t) = e^{t/2} M^{z_0}(w_0), beta_t = 1 - e^t (1 - beta_0)",
                  worst_rk4 if worst_alg <= 1e-10 else math.inf, 1e-8, detail)


def check_envelope_ordering(points: int = 10_000) -> CheckResult:
    N = 64
    rng = np.random.default_rng(3)
    zs = 0.9 * np.sqrt(rng.random(points)) * np.exp(2j * np.pi * rng.random(points))
    violations = 0
    for shape in (DomainShape.DISK, DomainShape.RECTANGLE):
        dom = build_domain(DomainSpec(shape=shape), N)
        lo, hi = envelopes(dom, 0.6, N)
        ind = dom.indicator(zs)
        violations += int(np.sum(lo.value(zs) > ind) + np.sum(ind > hi.value(zs)))
    return _check("envelope_ordering", "f- <= 1_Omega <= f+ pointwise", float(violations), 0.0)


# ---------------------------------------------------------------------
# Suite
# ---------------------------------------------------------------------
def selftest(solve: Solver = solve_mde) -> SelftestReport:
    """Run every identity check; a numerical failure inside a check marks it failed."""
    started = time.perf_counter()
    suite = [
        ("mde_residual", lambda: check_mde_residual(solve)),
        ("density_at_zero", check_density_at_zero),
        ("w_derivatives", lambda: check_w_derivatives(solve)),
        ("v12_derivative", check_v12),
        ("stability_spectrum", check_stability_spectrum),
        ("e_minus_identities", check_e_minus_identities),
        ("girko_identity", check_girko_identity),
        ("flow_laws", check_flow_laws),
        ("envelope_ordering", check_envelope_ordering),
    ]
    checks: List[CheckResult] = []
    for name, run in suite:
        try:
            result = run()
        except NumericalError as e:
            result = CheckResult(name=name, reference="", passed=False, residual=math.inf, tolerance=0.0, detail=str(e))
        LOG.info("selftest %-20s %s (residual %.3g)", name, "ok" if result.passed else "FAILED", result.residual)
        checks.append(result)
    return SelftestReport(checks=checks, wall_clock=time.perf_counter() - started)
