"""
Seeded Monte Carlo studies confronting sampled spectra with deterministic
predictions.

Every study maps a per-sample function over sample indices 0..n-1 with
joblib; sample k always draws from the stream (base seed, k), and results
come back in index order, so estimates do not depend on the worker count.
"""

from __future__ import annotations

import logging
import math
import time
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from hyperlab import __version__
from hyperlab.core.errors import ConfigError, HyperlabError, InsufficientSamplesError
from hyperlab.schemas import DomainSpec, EnsembleSpec, Estimate, ExperimentResult, FitResult, FlowKind
from hyperlab.services import stats
from hyperlab.services.det_chains import cov_predict, kappa4_for, m_chain, vf_functional
from hyperlab.services.flows import matrix_flow
from hyperlab.services.girko import TestFunction, build_domain, direct_statistic, envelopes
from hyperlab.services.mde_core import check_bulk_z, edge, quantiles, solve_mde
from hyperlab.services.spectra import (
    chain_trace,
    complex_spectrum,
    overlaps,
    resolvent_trace,
    sample,
    sample_points_uniform_disk,
    sample_rng,
)
from hyperlab.services.spectral_cache import cached_svd
from hyperlab.services.stability import Matrixish

LOG = logging.getLogger("hyperlab.experiments")

MIN_SAMPLES = {
    "numvar": 100,
    "trace-cov": 1000,
    "rigidity": 20,
    "tail": 10_000,
    "dbm": 200,
}
TAIL_FIT_WINDOW = (0.05, 0.5)
CONTROL_STREAM = 2
JACKKNIFE_BLOCKS = 50


# ---------------------------------------------------------------------
# Plumbing
# ---------------------------------------------------------------------
def _require(experiment: str, samples: int, min_samples: Optional[int]) -> None:
    floor = MIN_SAMPLES.get(experiment, 1) if min_samples is None else int(min_samples)
    if samples < floor:
        raise InsufficientSamplesError(f"{experiment}: {samples} samples per cell is below the minimum of {floor}")


def _map_samples(fn: Callable[[int], Any], samples: int, workers: int = 1) -> List[Any]:
    """fn(k) for k = 0..samples-1, returned in index order."""
    if workers <= 1:
        return [fn(k) for k in range(samples)]
    return Parallel(n_jobs=workers)(delayed(fn)(k) for k in range(samples))


def _result(
    experiment: str,
    spec: EnsembleSpec,
    samples: int,
    started: float,
    cells: List[Dict[str, Any]],
    estimates: Optional[List[Estimate]] = None,
    fits: Optional[Dict[str, FitResult]] = None,
    diagnostics: Optional[Dict[str, Any]] = None,
    warnings: Optional[List[str]] = None,
    config_hash: str = "",
) -> ExperimentResult:
    return ExperimentResult(
        experiment=experiment,
        config_hash=config_hash,
        base_seed=spec.seed,
        samples_per_cell=samples,
        cells=cells,
        estimates=estimates or [],
        fits=fits or {},
        diagnostics=diagnostics or {},
        warnings=warnings or [],
        wall_clock=time.perf_counter() - started,
        version=__version__,
    )


def _try_fit(x, y, se, warnings: List[str], label: str) -> Optional[FitResult]:
    try:
        return stats.exponent_fit(x, y, se)
    except ConfigError as e:
        warnings.append(f"{label}: {e}")
        LOG.warning("%s fit skipped: %s", label, e)
        return None


# ---------------------------------------------------------------------
# Number variance
# ---------------------------------------------------------------------
def _straddles_volume_law(cell: Dict[str, Any]) -> bool:
    return cell["ci_low"] <= cell["volume_law"] <= cell["ci_high"]


def _prefix_exponent(Ns: List[int], variances: List[float], ses: List[float]) -> Optional[float]:
    """Slope of the fit over the cells so far; None until three positive cells exist."""
    if len(Ns) < 3 or not all(v > 0 for v in variances):
        return None
    try:
        return stats.exponent_fit(Ns, variances, ses).slope
    except ConfigError:
        return None


def number_variance(
    domain_spec: DomainSpec,
    spec: EnsembleSpec,
    N_list: Sequence[int],
    samples: int,
    workers: int = 1,
    control: bool = False,
    min_samples: Optional[int] = None,
    config_hash: str = "",
) -> ExperimentResult:
    """
    Mean and variance of N_Omega = #{sigma_i in Omega_N} per N, and the
    log-log exponent of Var N_Omega against N. ``control=True`` replaces the
    eigenvalues with N i.i.d. uniform points in the unit disk.

    Each cell's ``exponent`` is the fit over that cell and all smaller N.
    The reported ``variance_exponent`` leaves out the smallest N when its
    CI contains the volume-law value N^(1 - 2 alpha).
    """
    _require("numvar", samples, min_samples)
    if list(N_list) != sorted(N_list):
        raise ConfigError("N_list must be ascending")
    started = time.perf_counter()
    cells, warnings = [], []
    Ns, variances, ses = [], [], []

    for N in N_list:
        sub = spec.with_N(N)
        domain = build_domain(domain_spec, N)

        def count(k: int, sub=sub, domain=domain) -> float:
            if control:
                pts = sample_points_uniform_disk(sub.N, sample_rng(sub.seed, k, CONTROL_STREAM))
            else:
                pts = complex_spectrum(sample(sub, k)).sigmas
            return float(domain.indicator(pts).sum())

        counts = np.asarray(_map_samples(count, samples, workers))
        est = stats.variance_estimate(f"var_N{N}", counts, JACKKNIFE_BLOCKS)
        Ns.append(N)
        variances.append(est.value)
        ses.append(est.se)
        q = min(domain.area / math.pi, 1.0)
        cell = {
            "N": N,
            "mean": float(counts.mean()),
            "var": est.value,
            "se": est.se,
            "exponent": _prefix_exponent(Ns, variances, ses),
            "ci_low": est.ci_low,
            "ci_high": est.ci_high,
            "volume_law": float(N) ** (1.0 - 2.0 * domain_spec.alpha),
        }
        if control:
            cell["binomial_variance"] = N * q * (1.0 - q)
        cells.append(cell)
        LOG.info("numvar N=%d: mean %.4g, var %.4g +- %.2g", N, cell["mean"], est.value, est.se)

    fits: Dict[str, FitResult] = {}
    dropped = False
    if all(v > 0 for v in variances):
        fit_all = _try_fit(Ns, variances, ses, warnings, "variance exponent")
        if fit_all is not None:
            fits["variance_exponent_all"] = fit_all
            fits["variance_exponent"] = fit_all
        if cells and _straddles_volume_law(cells[0]):
            if len(Ns) >= 4:
                trimmed = _try_fit(Ns[1:], variances[1:], ses[1:], warnings, "variance exponent (smallest N dropped)")
                if trimmed is not None:
                    fits["variance_exponent"] = trimmed
                    dropped = True
            else:
                warnings.append(f"N={Ns[0]} straddles the volume law but too few N remain to drop it")
    else:
        warnings.append("a cell has zero variance; exponent fit skipped")
    if dropped:
        LOG.info("numvar: N=%d straddles the volume law and is left out of the exponent fit", Ns[0])

    return _result(
        "numvar-control" if control else "numvar",
        spec,
        samples,
        started,
        cells,
        fits=fits,
        diagnostics={"alpha": domain_spec.alpha, "shape": domain_spec.shape.value, "smallest_N_dropped": dropped},
        warnings=warnings,
        config_hash=config_hash,
    )


# ---------------------------------------------------------------------
# Trace covariance
# ---------------------------------------------------------------------
def _variance_scale(z: complex, w: complex, kappa4: float, symmetry_class: str, N: int) -> float:
    """Predicted E|<G> - E<G>|^2, i.e. the predictor at (w, conj w)."""
    return abs(cov_predict(z, z, w, complex(w).conjugate(), kappa4, symmetry_class, N).value)


def required_samples(
    z1: complex, z2: complex, w1: complex, w2: complex, spec: EnsembleSpec, target_ratio: float = 1.0 / 3.0
) -> int:
    """
    Samples needed so the standard error of the covariance estimate is below
    ``target_ratio`` times the predicted leading term.
    """
    k4 = kappa4_for(spec.symmetry_class.value, spec.entry_law.value, spec.mu4, spec.gauss_mixing)
    cls = spec.symmetry_class.value
    pred = abs(cov_predict(z1, z2, w1, w2, k4, cls, spec.N).value)
    if pred == 0.0:
        raise ConfigError("predicted covariance vanishes; no finite sample size resolves it")
    spread = _variance_scale(z1, w1, k4, cls, spec.N) * _variance_scale(z2, w2, k4, cls, spec.N) + pred * pred
    return int(math.ceil(spread / (target_ratio * pred) ** 2))


def trace_covariance(
    z1: complex,
    z2: complex,
    w1: complex,
    w2: complex,
    spec: EnsembleSpec,
    samples: int,
    workers: int = 1,
    min_samples: Optional[int] = None,
    config_hash: str = "",
) -> ExperimentResult:
    """Empirical Cov(<G^{z1}(w1)>, <G^{z2}(w2)>) (bilinear) against the leading-term predictor."""
    _require("trace-cov", samples, min_samples)
    started = time.perf_counter()

    def traces(k: int) -> Tuple[complex, complex]:
        g1 = resolvent_trace(cached_svd(spec, z1, k), w1)
        g2 = resolvent_trace(cached_svd(spec, z2, k), w2)
        return g1, g2

    pairs = np.asarray(_map_samples(traces, samples, workers), dtype=complex)
    emp, se = stats.jackknife(pairs, stats.bilinear_covariance, JACKKNIFE_BLOCKS)
    im_var = stats.variance_estimate("var_im_g1", pairs[:, 0].imag, JACKKNIFE_BLOCKS)

    k4 = kappa4_for(spec.symmetry_class.value, spec.entry_law.value, spec.mu4, spec.gauss_mixing)
    pred = cov_predict(z1, z2, w1, w2, k4, spec.symmetry_class.value, spec.N)
    zscore = stats.z_score(emp, pred.value, se)
    warnings = []
    try:
        needed = required_samples(z1, z2, w1, w2, spec)
        if samples < needed:
            warnings.append(f"{samples} samples is below the {needed} needed to resolve the leading term")
    except HyperlabError as e:
        needed = -1
        warnings.append(str(e))

    cell = {
        "N": spec.N,
        "z1": complex(z1),
        "z2": complex(z2),
        "w1": complex(w1),
        "w2": complex(w2),
        "empirical": emp,
        "se": se,
        "predicted": pred.value,
        "V12": pred.V12,
        "kappa4": k4,
        "z_score": zscore,
        "mean_g1": complex(pairs[:, 0].mean()),
        "mean_g2": complex(pairs[:, 1].mean()),
    }
    LOG.info("trace-cov N=%d: empirical %s, predicted %s, z=%.2f", spec.N, emp, pred.value, zscore)
    return _result(
        "trace-cov",
        spec,
        samples,
        started,
        [cell],
        estimates=[im_var],
        diagnostics={"required_samples": needed, "U1": pred.U1, "U2": pred.U2},
        warnings=warnings,
        config_hash=config_hash,
    )


# ---------------------------------------------------------------------
# Rigidity
# ---------------------------------------------------------------------
def rigidity(
    z: complex,
    spec: EnsembleSpec,
    N_list: Sequence[int],
    samples: int,
    bulk_fraction: float = 0.9,
    workers: int = 1,
    tracked: Sequence[int] = (),
    min_samples: Optional[int] = None,
    config_hash: str = "",
) -> ExperimentResult:
    """
    Distribution of N * max_{i <= bulk_fraction N} |lambda_i - gamma_i| per N.
    ``tracked`` indices also get a mean-vs-quantile comparison.
    """
    _require("rigidity", samples, min_samples)
    if abs(complex(z)) > 0.9:
        raise ConfigError(f"rigidity needs |z| <= 0.9, got {abs(complex(z)):.3f}")
    if not 0.0 < bulk_fraction <= 0.9:
        raise ConfigError("bulk_fraction must lie in (0, 0.9]")
    started = time.perf_counter()
    cells, estimates, warnings = [], [], []
    Ns, medians = [], []
    for N in N_list:
        sub = spec.with_N(N)
        gam = quantiles(z, N)
        limit = int(math.floor(bulk_fraction * N))

        def singular(k: int, sub=sub) -> np.ndarray:
            return cached_svd(sub, z, k).lambdas

        lams = np.asarray(_map_samples(singular, samples, workers))
        dev = N * np.max(np.abs(lams[:, :limit] - gam[:limit]), axis=1)
        cell = {
            "N": N,
            "median": float(np.median(dev)),
            "p95": float(np.percentile(dev, 95)),
            "largest_mean": float(lams[:, -1].mean()),
            "edge": edge(z),
        }
        for i in tracked:
            if 1 <= i <= N:
                est = stats.mean_estimate(f"lambda_{i}_N{N}", lams[:, i - 1])
                estimates.append(est)
                cell[f"gamma_{i}"] = float(gam[i - 1])
                cell[f"z_gamma_{i}"] = stats.z_score(est.value, float(gam[i - 1]), est.se)
        cells.append(cell)
        Ns.append(N)
        medians.append(cell["median"])
        LOG.info("rigidity N=%d: median %.3g, p95 %.3g", N, cell["median"], cell["p95"])

    fits = {}
    if len(Ns) >= 3:
        fit = _try_fit(Ns, medians, None, warnings, "median growth")
        if fit is not None:
            fits["median_growth"] = fit
    return _result(
        "rigidity", spec, samples, started, cells, estimates=estimates, fits=fits,
        diagnostics={"z": complex(z), "bulk_fraction": bulk_fraction}, warnings=warnings, config_hash=config_hash,
    )


# ---------------------------------------------------------------------
# Smallest singular value tail
# ---------------------------------------------------------------------
def ginibre_tail_at_zero(x: np.ndarray) -> np.ndarray:
    """P[N lambda_1 <= x] for GinUE at z = 0 in the large-N limit."""
    return -np.expm1(-np.asarray(x, dtype=float) ** 2)


def smallest_eig_tail(
    z: complex,
    spec: EnsembleSpec,
    samples: int,
    x_grid: Sequence[float],
    workers: int = 1,
    min_samples: Optional[int] = None,
    config_hash: str = "",
) -> ExperimentResult:
    """Empirical P[lambda_1 <= x/N] on ``x_grid`` and the log-log slope on the fit window."""
    _require("tail", samples, min_samples)
    started = time.perf_counter()
    N = spec.N

    def smallest(k: int) -> float:
        return float(cached_svd(spec, z, k).lambdas[0])

    lam1 = np.asarray(_map_samples(smallest, samples, workers))
    xs = np.asarray(sorted(x_grid), dtype=float)
    scaled = N * lam1
    cells = []
    probs, ses, fit_x = [], [], []
    for x in xs:
        p = float(np.mean(scaled <= x))
        se = math.sqrt(max(p * (1.0 - p), 1.0 / samples) / samples)
        cell = {"x": float(x), "probability": p, "se": se}
        if complex(z) == 0 and spec.symmetry_class.value == "complex":
            cell["ginibre_reference"] = float(ginibre_tail_at_zero(x))
        cells.append(cell)
        if TAIL_FIT_WINDOW[0] <= x <= TAIL_FIT_WINDOW[1] and p > 0:
            fit_x.append(x)
            probs.append(p)
            ses.append(se)
    warnings: List[str] = []
    fits = {}
    fit = _try_fit(fit_x, probs, ses, warnings, "tail slope")
    if fit is not None:
        fits["tail_slope"] = fit
    monotone = all(a["probability"] <= b["probability"] for a, b in zip(cells, cells[1:]))
    return _result(
        "tail", spec, samples, started, cells, fits=fits,
        diagnostics={"monotone": monotone, "z": complex(z), "median_scaled": float(np.median(scaled))},
        warnings=warnings, config_hash=config_hash,
    )


# ---------------------------------------------------------------------
# Singular-vector overlaps
# ---------------------------------------------------------------------
def overlap_decay(
    z_pairs: Sequence[Tuple[complex, complex]],
    index_pairs: Sequence[Tuple[int, int]],
    spec: EnsembleSpec,
    samples: int,
    bulk_fraction: float = 0.9,
    workers: int = 1,
    config_hash: str = "",
) -> ExperimentResult:
    """
    Mean of N * overlap per (z1, z2, i, j) cell, its ratio to the decay profile
    1 / (|z1 - z2|^2 + |i - j| / N), and monotonicity checks.
    """
    for z1, z2 in z_pairs:
        for z in (z1, z2):
            if abs(complex(z)) > 0.9:
                raise ConfigError(f"overlaps need |z| <= 0.9, got {abs(complex(z)):.3f}")
    started = time.perf_counter()
    N = spec.N

    def per_sample(k: int) -> np.ndarray:
        data = {}
        rows = []
        for z1, z2 in z_pairs:
            for z in (z1, z2):
                if complex(z) not in data:
                    data[complex(z)] = cached_svd(spec, z, k, vectors=True)
            rows.append(overlaps(data[complex(z1)], data[complex(z2)], index_pairs, bulk_fraction))
        return N * np.asarray(rows)

    vals = np.asarray(_map_samples(per_sample, samples, workers))  # (samples, z_pairs, index_pairs)
    warnings = []
    nan_count = int(np.isnan(vals).sum())
    if nan_count:
        warnings.append(f"{nan_count} overlap values were dropped for degenerate singular values")

    cells = []
    constants = []
    for a, (z1, z2) in enumerate(z_pairs):
        for b, (i, j) in enumerate(index_pairs):
            col = vals[:, a, b]
            col = col[np.isfinite(col)]
            mean = float(col.mean()) if col.size else float("nan")
            se = float(col.std(ddof=1) / math.sqrt(col.size)) if col.size > 1 else float("nan")
            scale = abs(complex(z1) - complex(z2)) ** 2 + abs(i - j) / N
            ref = 1.0 / scale if scale > 0 else float("inf")
            ratio = mean / ref if math.isfinite(ref) else float("nan")
            if math.isfinite(ratio):
                constants.append(ratio)
            cells.append({
                "N": N, "z1": complex(z1), "z2": complex(z2), "i": i, "j": j,
                "mean": mean, "se": se, "reference": ref, "ratio": ratio,
            })

    decay_in_index = _monotone_within_ci(cells, key=lambda c: (c["z1"], c["z2"]), order=lambda c: abs(c["i"] - c["j"]))
    decay_in_z = _monotone_within_ci(cells, key=lambda c: (c["i"], c["j"]), order=lambda c: abs(c["z1"] - c["z2"]))
    return _result(
        "overlaps", spec, samples, started, cells,
        diagnostics={
            "fitted_constant": float(max(constants)) if constants else float("nan"),
            "decay_in_index": decay_in_index,
            "decay_in_z": decay_in_z,
        },
        warnings=warnings, config_hash=config_hash,
    )


def _monotone_within_ci(cells, key, order) -> bool:
    groups: Dict[Any, List[Dict[str, Any]]] = {}
    for c in cells:
        groups.setdefault(key(c), []).append(c)
    for members in groups.values():
        members = sorted(members, key=order)
        for prev, nxt in zip(members, members[1:]):
            if order(prev) == order(nxt):
                continue
            slack = 1.96 * math.hypot(prev["se"] or 0.0, nxt["se"] or 0.0)
            if nxt["mean"] > prev["mean"] + slack:
                return False
    return True


# ---------------------------------------------------------------------
# DBM decorrelation
# ---------------------------------------------------------------------
def _correlation(xy: np.ndarray) -> float:
    return float(np.corrcoef(xy[:, 0], xy[:, 1])[0, 1])


def dbm_decorrelation(
    z1: complex,
    z2: Sequence[complex],
    t_grid: Sequence[float],
    spec: EnsembleSpec,
    samples: int,
    dt: float = 1e-3,
    kind: FlowKind = FlowKind.BROWNIAN,
    workers: int = 1,
    min_samples: Optional[int] = None,
    config_hash: str = "",
) -> ExperimentResult:
    """
    Sample correlation of (lambda_1^{z1}(t), lambda_1^{z2}(t)) across seeds
    for each t and each z2, with jackknife errors.
    """
    _require("dbm", samples, min_samples)
    z2s = [complex(z2)] if np.ndim(z2) == 0 else [complex(z) for z in z2]
    times = sorted(float(t) for t in t_grid)
    if not times:
        raise ConfigError("dbm needs a nonempty t grid")
    if times[0] < 1.0 / spec.N or times[-1] > 1.0:
        raise ConfigError(
            f"dbm times must lie in [1/N, 1] = [{1.0 / spec.N:.3g}, 1], got [{times[0]:.3g}, {times[-1]:.3g}]"
        )
    warnings: List[str] = []
    started = time.perf_counter()

    def path(k: int) -> np.ndarray:
        p = matrix_flow(spec, kind, times, z_track=[z1] + z2s, indices=[1], dt=dt, index=k)
        return p.lambdas[:, :, 0]

    lam = np.asarray(_map_samples(path, samples, workers))  # (samples, times, 1 + len(z2s))
    cells = []
    for a, t in enumerate(times):
        for b, z in enumerate(z2s):
            xy = np.column_stack([lam[:, a, 0], lam[:, a, b + 1]])
            corr, se = stats.jackknife(xy, _correlation, JACKKNIFE_BLOCKS)
            cells.append({
                "N": spec.N, "t": t, "z1": complex(z1), "z2": z, "distance": abs(complex(z1) - z),
                "correlation": corr, "se": se, "scaled_distance": spec.N * abs(complex(z1) - z) ** 2,
                "error_scale": (1.0 / math.sqrt(spec.N * t) + t) / spec.N if t > 0 else float("inf"),
            })
    decreasing = _monotone_within_ci(
        [dict(c, mean=c["correlation"]) for c in cells], key=lambda c: c["t"], order=lambda c: c["distance"]
    )
    return _result(
        "dbm", spec, samples, started, cells,
        diagnostics={"decreasing_in_distance": decreasing, "dt": dt, "kind": FlowKind(kind).value},
        warnings=warnings, config_hash=config_hash,
    )


# ---------------------------------------------------------------------
# Smooth statistics, envelopes, local law, chains
# ---------------------------------------------------------------------
def linear_statistic_variance(
    f: TestFunction,
    spec: EnsembleSpec,
    samples: int,
    workers: int = 1,
    config_hash: str = "",
) -> ExperimentResult:
    """Empirical Var sum_i f(sigma_i) against V_f."""
    started = time.perf_counter()

    def statistic(k: int) -> float:
        return direct_statistic(complex_spectrum(sample(spec, k)), f)

    L = np.asarray(_map_samples(statistic, samples, workers))
    est = stats.variance_estimate("var_L", L, JACKKNIFE_BLOCKS)
    k4 = kappa4_for(spec.symmetry_class.value, spec.entry_law.value, spec.mu4, spec.gauss_mixing)
    predicted = vf_functional(f, k4)
    warnings = []
    if spec.is_real:
        warnings.append("V_f is the complex-class limit; the real class differs for f not symmetric under conjugation")
    cell = {
        "N": spec.N, "mean": float(L.mean()), "variance": est.value, "se": est.se,
        "predicted": predicted, "z_score": stats.z_score(est.value, predicted, est.se),
    }
    return _result("linear-statistic", spec, samples, started, [cell], estimates=[est], warnings=warnings,
                   config_hash=config_hash)


def portmanteau_check(
    domain_spec: DomainSpec,
    spec: EnsembleSpec,
    samples: int,
    a: float,
    workers: int = 1,
    config_hash: str = "",
) -> ExperimentResult:
    """
    Var N_Omega against 2[Var L(f+) + Var L(f-) + (E L(f+) - E L(f-))^2] for
    the inner/outer mollified envelopes, plus the pathwise ordering
    L(f-) <= N_Omega <= L(f+).
    """
    started = time.perf_counter()
    N = spec.N
    domain = build_domain(domain_spec, N)
    f_minus, f_plus = envelopes(domain, a, N)

    def triple(k: int) -> Tuple[float, float, float]:
        spectrum = complex_spectrum(sample(spec, k))
        return (
            direct_statistic(spectrum, f_minus),
            float(domain.indicator(spectrum.sigmas).sum()),
            direct_statistic(spectrum, f_plus),
        )

    vals = np.asarray(_map_samples(triple, samples, workers))
    lo, cnt, hi = vals[:, 0], vals[:, 1], vals[:, 2]
    var_count = stats.variance(cnt)
    bound = 2.0 * (stats.variance(hi) + stats.variance(lo) + (hi.mean() - lo.mean()) ** 2)
    ordered = bool(np.all(lo <= cnt + 1e-9) and np.all(cnt <= hi + 1e-9))
    cell = {
        "N": N, "a": a, "var_count": var_count, "var_plus": stats.variance(hi), "var_minus": stats.variance(lo),
        "mean_gap": float(hi.mean() - lo.mean()), "bound": float(bound), "holds": bool(var_count <= bound),
    }
    return _result("portmanteau", spec, samples, started, [cell],
                   diagnostics={"pathwise_ordering": ordered, "eps": f_plus.eps}, config_hash=config_hash)


def averaged_local_law(
    z: complex,
    etas: Sequence[float],
    spec: EnsembleSpec,
    samples: int,
    E: float = 0.0,
    workers: int = 1,
    config_hash: str = "",
) -> ExperimentResult:
    """|<G^z(E + i eta)> - m^z(E + i eta)| against the 1/(N eta) scale."""
    check_bulk_z(z)
    started = time.perf_counter()
    ws = np.array([complex(E, eta) for eta in etas])
    ms = np.array([solve_mde(z, w).m for w in ws])

    def errors(k: int) -> np.ndarray:
        return np.abs(resolvent_trace(cached_svd(spec, z, k), ws) - ms)

    err = np.asarray(_map_samples(errors, samples, workers))
    cells = []
    for idx, eta in enumerate(etas):
        scale = 1.0 / (spec.N * eta)
        cells.append({
            "N": spec.N, "eta": float(eta), "mean_error": float(err[:, idx].mean()),
            "max_error": float(err[:, idx].max()), "scale": scale,
            "ratio": float(err[:, idx].mean() / scale),
        })
    return _result("local-law", spec, samples, started, cells, diagnostics={"z": complex(z), "E": E},
                   config_hash=config_hash)


def chain_agreement(
    z1: complex,
    z2: complex,
    w1: complex,
    w2: complex,
    B1: Matrixish,
    B2: Matrixish,
    spec: EnsembleSpec,
    samples: int,
    workers: int = 1,
    config_hash: str = "",
) -> ExperimentResult:
    """Sample mean of <G_1 B_1 G_2 B_2> against <M_12^{B_1} B_2>."""
    started = time.perf_counter()

    def trace(k: int) -> complex:
        return chain_trace(sample(spec, k), [(z1, w1, False), (z2, w2, False)], [B1, B2])

    vals = np.asarray(_map_samples(trace, samples, workers), dtype=complex)
    det = m_chain([(z1, w1), (z2, w2)], [B1]).trace_with(B2)
    mean = complex(vals.mean())
    se = float(np.sqrt(np.var(vals.real, ddof=1) + np.var(vals.imag, ddof=1)) / math.sqrt(samples)) if samples > 1 else float("nan")
    cell = {
        "N": spec.N, "empirical": mean, "se": se, "deterministic": det,
        "difference": abs(mean - det), "z_score": stats.z_score(mean, det, se),
    }
    return _result("chain-agreement", spec, samples, started, [cell], config_hash=config_hash)
