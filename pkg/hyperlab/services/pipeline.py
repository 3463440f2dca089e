"""
Run orchestration: config loading, command dispatch and artifacts.

Each run writes into <out>/<command>-<config hash>/:
  result.csv    one row per cell, schema_version first
  result.json   sidecar with the config, seeds, estimates and fits
  summary.txt   human-readable table (includes wall-clock time)
  report.pdf    optional, when HYPERLAB_PDF_REPORT is set and reportlab is present
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np
import yaml
from pydantic import ValidationError

from hyperlab import __version__
from hyperlab.core import config
from hyperlab.core.errors import ConfigError
from hyperlab.schemas import Command, ExperimentResult, RunConfig, SelftestReport
from hyperlab.services import experiments, storage
from hyperlab.services.det_chains import cov_predict, kappa4_for
from hyperlab.services.flows import characteristic_flow, flow_invariant_report, trajectory_csv
from hyperlab.services.girko import build_domain, build_test_function, direct_statistic, girko_evaluate
from hyperlab.services.mde_core import check_bulk_z, density, derivatives, edge, solve_mde
from hyperlab.services.report_export import generate_pdf_bytes
from hyperlab.services.selftest import selftest
from hyperlab.services.spectra import complex_spectrum, sample, sample_rng
from hyperlab.services.stability import beta_hat_operator, eigenvalue_mismatch, stability_state
from hyperlab.services.utils import format_table, sanitize, to_hash, write_csv, write_json

LOG = logging.getLogger("hyperlab.pipeline")

Result = Union[ExperimentResult, SelftestReport]


@dataclass
class RunOutcome:
    command: str
    status: str
    out_dir: Path
    result: Result
    config_hash: str
    run_id: Optional[int] = None

    @property
    def exit_code(self) -> int:
        return 0 if self.status == "ok" else 1


# ---------------------------------------------------------------------
# Config I/O
# ---------------------------------------------------------------------
def read_config(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read config: {e}", config_path=path)
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping", config_path=path)
    return raw


def build_config(raw: Dict[str, Any], path: Optional[str] = None) -> RunConfig:
    """Validate a raw mapping; validation errors carry the config path."""
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(_validation_message(e), config_path=path or "<flags>")


def load_config(path: str, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Parse a YAML run config, applying top-level ``overrides`` that are not None."""
    raw = read_config(path)
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build_config(raw, path)


def _validation_message(e: ValidationError) -> str:
    parts = []
    for err in e.errors():
        loc = ".".join(str(x) for x in err.get("loc", ())) or "config"
        parts.append(f"{loc}: {err.get('msg')}")
    return "; ".join(parts)


def dump_config(cfg: RunConfig) -> str:
    """Reference YAML with every default spelled out."""
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False)


# fields with no influence on result.csv / result.json
RESULT_NEUTRAL = {"out", "workers"}


def config_hash(cfg: RunConfig) -> str:
    return to_hash(cfg.model_dump_json(exclude=RESULT_NEUTRAL))


# ---------------------------------------------------------------------
# Deterministic commands
# ---------------------------------------------------------------------
def _run_mde(cfg: RunConfig, h: str) -> ExperimentResult:
    started = time.perf_counter()
    cells = []
    for z in cfg.grids.z:
        check_bulk_z(z, cfg.z_max)
        for w in cfg.grids.w:
            p = solve_mde(z, w)
            dm, du = derivatives(p)
            cells.append({
                "z": p.z, "w": p.w, "m": p.m, "u": p.u, "dm_dw": dm, "du_dw": du,
                "residual": p.residual(), "rho_at_E": density(z, abs(w.real)), "edge": edge(z),
            })
    return _deterministic("mde", cfg, h, cells, started)


def _run_stab(cfg: RunConfig, h: str) -> ExperimentResult:
    started = time.perf_counter()
    cells = []
    for z1, z2, w1, w2 in product(cfg.grids.z, cfg.grids.z2, cfg.grids.w, cfg.grids.w2):
        st = stability_state(z1, z2, w1, w2, kappa=None)
        cells.append({
            "z1": z1, "z2": z2, "w1": w1, "w2": w2,
            "beta_plus": st.beta_plus, "beta_minus": st.beta_minus, "beta_star": st.beta_star,
            "beta_hat": st.beta_hat, "beta_hat_operator": beta_hat_operator(z1, z2, w1, w2),
            "gamma": st.gamma, "lt": st.lt, "ratio": st.beta_hat / st.gamma if st.gamma else float("nan"),
            "spectrum_mismatch": eigenvalue_mismatch(st),
        })
    return _deterministic("stab", cfg, h, cells, started)


def _run_predict_cov(cfg: RunConfig, h: str) -> ExperimentResult:
    started = time.perf_counter()
    ens = cfg.ensemble
    k4 = kappa4_for(ens.symmetry_class.value, ens.entry_law.value, ens.mu4, ens.gauss_mixing)
    cells = []
    for z1, z2, w1, w2 in product(cfg.grids.z, cfg.grids.z2, cfg.grids.w, cfg.grids.w2):
        p = cov_predict(z1, z2, w1, w2, k4, ens.symmetry_class.value, ens.N)
        cells.append({
            "N": ens.N, "z1": z1, "z2": z2, "w1": w1, "w2": w2,
            "V12": p.V12, "U1": p.U1, "U2": p.U2, "kappa4": k4, "predicted": p.value,
        })
    return _deterministic("predict-cov", cfg, h, cells, started)


def _run_girko(cfg: RunConfig, h: str) -> ExperimentResult:
    started = time.perf_counter()
    ens = cfg.ensemble
    N = ens.N
    regimes = cfg.regimes.resolve(N)
    domain = build_domain(cfg.domain, N)
    f = build_test_function(cfg.test_function, domain, N)
    X = sample(ens, 0)
    br = girko_evaluate(X, f, regimes)
    direct = direct_statistic(complex_spectrum(X), f)
    cells = [{"piece": name, "value": value} for name, value in br.pieces.items()]
    cells.append({"piece": "total", "value": br.total})
    cells.append({"piece": "direct", "value": direct})
    diagnostics = {
        "identity_residual": abs(br.total - direct),
        "regime_split_residual": abs(br.total - br.closed_form),
        "nodes": br.nodes,
        "regimes": list(regimes),
        "eps": f.eps,
    }
    return _deterministic("girko-check", cfg, h, cells, started, diagnostics)


def _run_flow_check(cfg: RunConfig, h: str, out_dir: Path) -> ExperimentResult:
    started = time.perf_counter()
    points = [(z, w) for z, w in product(cfg.grids.z, cfg.grids.w)]
    rng = sample_rng(cfg.base_seed, 0)
    for _ in range(max(cfg.trajectories - len(points), 0)):
        z = 0.8 * np.sqrt(rng.random()) * np.exp(2j * np.pi * rng.random())
        w = complex(rng.uniform(-0.5, 0.5), rng.uniform(0.1, 1.0))
        points.append((complex(z), w))
    cells = []
    for k, (z, w) in enumerate(points):
        traj = characteristic_flow(z, w, cfg.t_span, "backward")
        report = flow_invariant_report(traj)
        if k < len(cfg.grids.z) * len(cfg.grids.w):
            trajectory_csv(traj, out_dir / f"trajectory_{k}.csv")
        cells.append(dict({"z_end": z, "w_end": w}, **report))
    diagnostics = {
        "max_rk4_deviation": max(c["rk4_deviation"] for c in cells),
        "max_m_scaling_residual": max(c["m_scaling_residual"] for c in cells),
        "max_beta_line_residual": max(c["beta_line_residual"] for c in cells),
    }
    return _deterministic("flow-check", cfg, h, cells, started, diagnostics)


def _deterministic(name, cfg, h, cells, started, diagnostics=None) -> ExperimentResult:
    return ExperimentResult(
        experiment=name,
        config_hash=h,
        base_seed=cfg.base_seed,
        samples_per_cell=1,
        cells=cells,
        diagnostics=diagnostics or {},
        wall_clock=time.perf_counter() - started,
        version=__version__,
    )


# ---------------------------------------------------------------------
# Monte Carlo commands
# ---------------------------------------------------------------------
def _merge(results: List[ExperimentResult]) -> ExperimentResult:
    head = results[0]
    if len(results) == 1:
        return head
    merged = head.model_copy(deep=True)
    for r in results[1:]:
        merged.cells.extend(r.cells)
        merged.estimates.extend(r.estimates)
        merged.warnings.extend(r.warnings)
        merged.wall_clock += r.wall_clock
        for k, v in r.fits.items():
            merged.fits[f"{k}_{len(merged.fits)}"] = v
    return merged


def _run_monte_carlo(cfg: RunConfig, h: str) -> ExperimentResult:
    ens = cfg.ensemble.model_copy(update={"seed": cfg.base_seed})
    g = cfg.grids
    w = cfg.workers
    cmd = cfg.command
    if cmd == Command.NUMVAR:
        return experiments.number_variance(cfg.domain, ens, g.N, cfg.samples, w, cfg.control, config_hash=h)
    if cmd == Command.TRACE_COV:
        return _merge([
            experiments.trace_covariance(z1, z2, w1, w2, ens, cfg.samples, w, config_hash=h)
            for z1, z2, w1, w2 in product(g.z, g.z2, g.w, g.w2)
        ])
    if cmd == Command.RIGIDITY:
        return _merge([
            experiments.rigidity(z, ens, g.N, cfg.samples, cfg.bulk_fraction, w, config_hash=h) for z in g.z
        ])
    if cmd == Command.TAIL:
        return _merge([experiments.smallest_eig_tail(z, ens, cfg.samples, g.x, w, config_hash=h) for z in g.z])
    if cmd == Command.OVERLAPS:
        return experiments.overlap_decay(
            list(product(g.z, g.z2)), g.index_pairs, ens, cfg.samples, cfg.bulk_fraction, w, config_hash=h
        )
    if cmd == Command.DBM:
        return experiments.dbm_decorrelation(
            g.z[0], g.z2, g.t, ens, cfg.samples, cfg.dt, cfg.flow_kind, w, config_hash=h
        )
    raise ConfigError(f"command {cmd.value!r} is not a Monte Carlo experiment")


# ---------------------------------------------------------------------
# Artifacts
# ---------------------------------------------------------------------
def _selftest_result(report: SelftestReport) -> List[Dict[str, Any]]:
    return [c.model_dump() for c in report.checks]


def write_artifacts(out_dir: Path, cfg: RunConfig, result: Result) -> None:
    """CSV and JSON are pure functions of (config, seed, version); wall-clock goes to the summary only."""
    out_dir.mkdir(parents=True, exist_ok=True)
    if isinstance(result, SelftestReport):
        rows = _selftest_result(result)
        sidecar = {"checks": rows, "passed": result.passed}
    else:
        rows = result.cells
        sidecar = sanitize(result.model_dump(exclude={"wall_clock"}))
    sidecar["config"] = cfg.model_dump(mode="json", exclude=RESULT_NEUTRAL)
    write_csv(out_dir / "result.csv", rows)
    write_json(out_dir / "result.json", sidecar)

    columns = list(rows[0].keys()) if rows else []
    lines = [f"hyperlab {__version__} - {cfg.command.value}", f"wall clock: {result.wall_clock:.3f} s", ""]
    lines.append(format_table([sanitize_row(r) for r in rows], columns) if rows else "(no cells)")
    if isinstance(result, ExperimentResult):
        for name, fit in result.fits.items():
            lines.append(f"fit {name}: slope {fit.slope:.4g} [{fit.slope_ci[0]:.4g}, {fit.slope_ci[1]:.4g}]")
        for w in result.warnings:
            lines.append(f"warning: {w}")
    (out_dir / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

    if config.ENABLE_PDF_REPORT:
        payload = sanitize(sidecar if isinstance(result, SelftestReport) else result)
        pdf = generate_pdf_bytes(payload)
        if pdf is None:
            LOG.warning("PDF summary requested but reportlab is unavailable")
        else:
            (out_dir / "report.pdf").write_bytes(pdf)


def sanitize_row(row: Dict[str, Any]) -> Dict[str, Any]:
    return {k: (v if isinstance(v, (complex, float, int, str)) else sanitize(v)) for k, v in row.items()}


# ---------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------
DETERMINISTIC: Dict[Command, Callable[[RunConfig, str], ExperimentResult]] = {
    Command.MDE: _run_mde,
    Command.STAB: _run_stab,
    Command.PREDICT_COV: _run_predict_cov,
    Command.GIRKO_CHECK: _run_girko,
}


def run(cfg: RunConfig, db_path: Optional[str] = None) -> RunOutcome:
    """
    Execute ``cfg.command`` and write its artifacts. HyperlabError propagates
    to the caller; the run history records successes and failed selftests.
    """
    h = config_hash(cfg)
    out_dir = Path(cfg.out) / f"{cfg.command.value}-{h}"
    LOG.info("Running %s (config %s, seed %d) -> %s", cfg.command.value, h, cfg.base_seed, out_dir)

    status = "ok"
    if cfg.command == Command.SELFTEST:
        result: Result = selftest()
        status = "ok" if result.passed else "failed"
    elif cfg.command in DETERMINISTIC:
        result = DETERMINISTIC[cfg.command](cfg, h)
    elif cfg.command == Command.FLOW_CHECK:
        out_dir.mkdir(parents=True, exist_ok=True)
        result = _run_flow_check(cfg, h, out_dir)
    else:
        result = _run_monte_carlo(cfg, h)

    write_artifacts(out_dir, cfg, result)
    summary = f"{len(_rows(result))} cells" if status == "ok" else f"{len(result.failures)} failed checks"
    run_id = storage.save_run(cfg.command.value, h, cfg.base_seed, status, str(out_dir), summary,
                              {"config": cfg.model_dump(mode="json")}, db_path=db_path)
    LOG.info("Finished %s: %s in %.2f s", cfg.command.value, status, result.wall_clock)
    return RunOutcome(command=cfg.command.value, status=status, out_dir=out_dir, result=result,
                      config_hash=h, run_id=run_id)


def _rows(result: Result) -> List[Any]:
    return result.checks if isinstance(result, SelftestReport) else result.cells
