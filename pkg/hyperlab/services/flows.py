"""
Characteristic flow of the Hermitized resolvent and the matrix flows
(Brownian / Ornstein-Uhlenbeck) that drive DBM experiments.

Along the characteristic

    dz_t/dt = -z_t / 2,    dw_t/dt = -w_t / 2 - m^{z_t}(w_t)

everything is explicit once the time-0 anchor (z_0, w_0, m_0) is known:
z_t = e^{-t/2} z_0, w_t = e^{-t/2} w_0 - 2 m_0 sinh(t/2), m_t = e^{t/2} m_0,
u_t = e^t u_0. The RK4 integrator below is the independent oracle.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from hyperlab.core.errors import ConfigError, FlowTerminationError, SolverFailure
from hyperlab.schemas import EnsembleSpec, FlowKind
from hyperlab.services.mde_core import M_matrix, MdePoint, solve_mde
from hyperlab.services.spectra import resolvent_trace, sample, sample_rng, svd_data, unit_entries
from hyperlab.services.stability import _beta_from_points, beta_hat_points
from hyperlab.services.utils import write_csv

LOG = logging.getLogger("hyperlab.flows")

MAX_FLOW_N = 512
MAX_DT = 1e-3
ANCHOR_TOL = 1e-12
RK4_STEPS_PER_UNIT = 400
FLOW_NOISE_STREAM = 1


# ---------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class FlowState:
    t: float
    z_t: complex
    w_t: complex
    m_t: complex
    u_t: complex
    beta_t: Tuple[complex, complex]
    beta_hat_t: float = float("nan")

    @property
    def eta_t(self) -> float:
        return abs(self.w_t.imag)

    @property
    def M(self) -> np.ndarray:
        return M_matrix(self.z_t, self.m_t, self.u_t)


@dataclass
class FlowTrajectory:
    """States on an ascending time grid plus the anchor they were built from."""

    states: List[FlowState]
    anchor: MdePoint
    companion: MdePoint
    direction: str = "forward"

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, k: int) -> FlowState:
        return self.states[k]


@dataclass
class MatrixFlowPath:
    kind: FlowKind
    times: np.ndarray
    z_track: List[complex]
    indices: List[int]
    w_track: List[complex]
    lambdas: np.ndarray          # (times, z, indices)
    traces: np.ndarray           # (times, z, w)
    frobenius_increment: np.ndarray
    entry_moments: np.ndarray    # (times, 2): N E|x|^2 and N^2 E|x|^4
    final: Optional[np.ndarray] = field(default=None, repr=False)


# ---------------------------------------------------------------------
# Closed form
# ---------------------------------------------------------------------
def eta_crossing_time(z0: complex, w0: complex, m0: Optional[complex] = None) -> float:
    """
    First t with Im w_t = 0: e^{t} = 1 + Im w_0 / Im m_0.
    Returns inf when the path never reaches the real axis.
    """
    if m0 is None:
        m0 = solve_mde(z0, w0).m
    w0, m0 = complex(w0), complex(m0)
    if w0.imag == 0.0:
        return 0.0
    if w0.imag * m0.imag <= 0.0:
        return math.inf
    return math.log1p(w0.imag / m0.imag)


def closed_form(z0: complex, w0: complex, m0: complex, t: float) -> Tuple[complex, complex, complex]:
    """(z_t, w_t, m_t) from the time-0 anchor."""
    half = 0.5 * t
    z_t = math.exp(-half) * complex(z0)
    w_t = math.exp(-half) * complex(w0) - 2.0 * complex(m0) * math.sinh(half)
    return z_t, w_t, math.exp(half) * complex(m0)


def _point_on_path(z0: complex, w0: complex, m0: complex, t: float) -> MdePoint:
    z_t, w_t, m_t = closed_form(z0, w0, m0, t)
    return solve_mde(z_t, w_t, anchor=m_t)


def _backward_anchor(z_end: complex, w_end: complex, t_span: float) -> MdePoint:
    """Time-0 point whose characteristic reaches (z_end, w_end) at t_span."""
    end = solve_mde(z_end, w_end)
    half = 0.5 * t_span
    m0 = math.exp(-half) * end.m
    z0 = math.exp(half) * end.z
    for _ in range(20):
        w0 = math.exp(half) * (end.w + 2.0 * m0 * math.sinh(half))
        p0 = solve_mde(z0, w0, anchor=m0)
        if abs(p0.m - m0) <= ANCHOR_TOL * max(1.0, abs(m0)):
            return p0
        m0 = p0.m
    raise SolverFailure("backward anchor did not reach m-consistency", z0, w0, abs(p0.m - m0))


def _state(t: float, p: MdePoint, q: MdePoint) -> FlowState:
    return FlowState(
        t=float(t), z_t=p.z, w_t=p.w, m_t=p.m, u_t=p.u,
        beta_t=_beta_from_points(p, q), beta_hat_t=beta_hat_points(p, q),
    )


def characteristic_flow(
    z_end: complex,
    w_end: complex,
    t_span: float,
    direction: str = "backward",
    points: int = 101,
    companion: Optional[Tuple[complex, complex]] = None,
) -> FlowTrajectory:
    """
    Trajectory on ``points`` equally spaced times in [0, t_span].

    ``direction="backward"`` treats (z_end, w_end) as the final condition at
    t_span; ``"forward"`` starts the flow there at t = 0. ``companion`` is a
    second (z, w) transported along its own characteristic for beta_t; the
    default is the conjugate point (z, conj w).
    """
    if t_span < 0:
        raise ConfigError(f"t_span must be >= 0, got {t_span}")
    if complex(w_end).imag == 0.0:
        raise ConfigError("characteristic flow needs w off the real axis")
    if direction not in ("backward", "forward"):
        raise ConfigError(f"unknown flow direction {direction!r}")
    points = max(int(points), 2)

    if direction == "backward":
        p0 = _backward_anchor(z_end, w_end, t_span)
    else:
        p0 = solve_mde(z_end, w_end)
        t_cross = eta_crossing_time(p0.z, p0.w, p0.m)
        if t_cross <= t_span:
            raise FlowTerminationError("characteristic reaches the real axis", t_cross)

    if companion is None:
        q0 = MdePoint(z=p0.z, w=p0.w.conjugate(), m=p0.m.conjugate(), u=p0.u.conjugate())
    else:
        zc, wc = companion
        q0 = _backward_anchor(zc, wc, t_span) if direction == "backward" else solve_mde(zc, wc)

    states = []
    for t in np.linspace(0.0, t_span, points):
        p = _point_on_path(p0.z, p0.w, p0.m, t)
        q = _point_on_path(q0.z, q0.w, q0.m, t)
        states.append(_state(t, p, q))
    LOG.debug("characteristic flow %s: %d states, eta %.3g -> %.3g", direction, points, states[0].eta_t, states[-1].eta_t)
    return FlowTrajectory(states=states, anchor=p0, companion=q0, direction=direction)


# ---------------------------------------------------------------------
# Numerical oracle
# ---------------------------------------------------------------------
def rk4_flow(z0: complex, w0: complex, times: Sequence[float], m0: Optional[complex] = None) -> np.ndarray:
    """
    Classic RK4 on the characteristic ODE, re-solving the MDE at every stage
    (branch continued from the previous m). Returns w at ``times``.
    """
    times = np.asarray(times, dtype=float)
    z, w = complex(z0), complex(w0)
    m_prev = complex(m0) if m0 is not None else solve_mde(z, w).m

    def rhs(zz: complex, ww: complex) -> Tuple[complex, complex]:
        nonlocal m_prev
        m = solve_mde(zz, ww, anchor=m_prev).m
        m_prev = m
        return -0.5 * zz, -0.5 * ww - m

    out = np.empty(times.size, dtype=complex)
    t = 0.0
    for k, target in enumerate(times):
        n = max(int(math.ceil((target - t) * RK4_STEPS_PER_UNIT)), 0)
        h = (target - t) / n if n else 0.0
        for _ in range(n):
            k1 = rhs(z, w)
            k2 = rhs(z + 0.5 * h * k1[0], w + 0.5 * h * k1[1])
            k3 = rhs(z + 0.5 * h * k2[0], w + 0.5 * h * k2[1])
            k4 = rhs(z + h * k3[0], w + h * k3[1])
            z += h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            w += h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        t = target
        out[k] = w
    return out


def flow_invariant_report(trajectory: FlowTrajectory) -> Dict[str, float]:
    """Residuals of the closed-form laws along one trajectory."""
    p0 = trajectory.anchor
    times = trajectory.times
    w_closed = np.array([s.w_t for s in trajectory.states])
    w_rk4 = rk4_flow(p0.z, p0.w, times, p0.m)

    M0 = p0.M
    m_scaling = max(float(np.max(np.abs(s.M - math.exp(0.5 * s.t) * M0))) for s in trajectory.states)

    b0 = trajectory.states[0].beta_t
    beta_line = 0.0
    for s in trajectory.states:
        g = math.exp(s.t)
        for b, b_init in zip(s.beta_t, b0):
            beta_line = max(beta_line, abs(b - (1.0 - g * (1.0 - b_init))))

    etas = np.array([s.eta_t for s in trajectory.states])
    ratios = []
    for j in range(1, len(etas)):
        for i in range(j):
            ratios.append(etas[i] / (etas[j] + (times[j] - times[i])))
    ratios = np.asarray(ratios) if ratios else np.array([1.0])

    bh = np.array([s.beta_hat_t for s in trajectory.states])
    bh_growth = float("nan")
    if np.all(np.isfinite(bh)) and np.all(bh > 0):
        bh_growth = float(max(bh[j] / bh[i] for j in range(1, len(bh)) for i in range(j))) if len(bh) > 1 else 1.0

    return {
        "rk4_deviation": float(np.max(np.abs(w_closed - w_rk4))),
        "m_scaling_residual": m_scaling,
        "beta_line_residual": float(beta_line),
        "eta_strictly_decreasing": float(np.all(np.diff(etas) < 0)) if len(etas) > 1 else 1.0,
        "eta_ratio_min": float(ratios.min()),
        "eta_ratio_max": float(ratios.max()),
        "beta_hat_growth": bh_growth,
    }


def trajectory_csv(trajectory: FlowTrajectory, path: Path) -> Path:
    rows = [
        {
            "t": s.t,
            "z_t": s.z_t,
            "w_t": s.w_t,
            "m_t": s.m_t,
            "eta_t": s.eta_t,
            "beta_plus": s.beta_t[0],
            "beta_minus": s.beta_t[1],
        }
        for s in trajectory.states
    ]
    return write_csv(path, rows)


# ---------------------------------------------------------------------
# Matrix flows
# ---------------------------------------------------------------------
def _track(X: np.ndarray, z_track, indices, w_track) -> Tuple[np.ndarray, np.ndarray]:
    lam = np.empty((len(z_track), len(indices)))
    tr = np.empty((len(z_track), len(w_track)), dtype=complex)
    for a, z in enumerate(z_track):
        data = svd_data(X, z, vectors=False)
        lam[a] = data.lambdas[np.asarray(indices, dtype=int) - 1]
        if len(w_track):
            tr[a] = resolvent_trace(data, np.asarray(w_track, dtype=complex))
    return lam, tr


def matrix_flow(
    spec: EnsembleSpec,
    kind: FlowKind,
    t_grid: Sequence[float],
    z_track: Sequence[complex] = (0j,),
    indices: Sequence[int] = (1,),
    w_track: Sequence[complex] = (),
    dt: float = MAX_DT,
    index: int = 0,
    noise: bool = True,
    X0: Optional[np.ndarray] = None,
) -> MatrixFlowPath:
    """
    Evolve sample ``index`` of ``spec`` under dX = dB / sqrt(N) (brownian) or
    dX = -X/2 dt + dB / sqrt(N) (ornstein-uhlenbeck) and record the tracked
    singular values and resolvent traces at each node of ``t_grid``.
    """
    if dt > MAX_DT or dt <= 0:
        raise ConfigError(f"flow step dt={dt} must lie in (0, {MAX_DT}]")
    if spec.N > MAX_FLOW_N:
        raise ConfigError(f"matrix flows are limited to N <= {MAX_FLOW_N}")
    times = np.asarray(sorted(float(t) for t in t_grid))
    if times.size == 0 or times[0] < 0:
        raise ConfigError("t_grid must be non-empty and non-negative")
    if any(not 1 <= i <= spec.N for i in indices):
        raise ConfigError(f"tracked indices must lie in 1..{spec.N}")

    N = spec.N
    kind = FlowKind(kind)
    X = np.array(sample(spec, index) if X0 is None else X0, dtype=float if spec.is_real else complex)
    start = X.copy()
    rng = sample_rng(spec.seed, index, FLOW_NOISE_STREAM)

    lambdas, traces, frob, moments = [], [], [], []
    t = 0.0
    for target in times:
        n = int(math.ceil((target - t) / dt - 1e-12))
        h = (target - t) / n if n > 0 else 0.0
        for _ in range(n):
            xi = unit_entries((N, N), spec.is_real, rng) if noise else 0.0
            if kind == FlowKind.ORNSTEIN_UHLENBECK:
                X = math.exp(-0.5 * h) * X + math.sqrt(-math.expm1(-h)) * xi / math.sqrt(N)
            else:
                X = X + math.sqrt(h / N) * xi
        t = float(target)
        lam, tr = _track(X, z_track, indices, w_track)
        lambdas.append(lam)
        traces.append(tr)
        frob.append(float(np.sum(np.abs(X - start) ** 2)))
        a2 = np.abs(X) ** 2
        moments.append((N * float(a2.mean()), N * N * float((a2 * a2).mean())))

    return MatrixFlowPath(
        kind=kind,
        times=times,
        z_track=[complex(z) for z in z_track],
        indices=[int(i) for i in indices],
        w_track=[complex(w) for w in w_track],
        lambdas=np.array(lambdas),
        traces=np.array(traces),
        frobenius_increment=np.array(frob),
        entry_moments=np.array(moments),
        final=X,
    )
