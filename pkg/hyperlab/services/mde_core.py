"""
Scalar matrix Dyson equation for the Hermitized i.i.d. model.

For a Hermitization parameter z and spectral parameter w the deterministic
approximation of the resolvent is the 2x2 block-constant matrix

    M = [[m, -z u], [-conj(z) u, m]],   u = m / (w + m),

where m solves  -1/m = w + m - |z|^2 / (w + m)  with Im m * Im w > 0.

Clearing denominators gives the cubic

    m^3 + 2w m^2 + (w^2 + 1 - |z|^2) m + w = 0,

whose roots are computed as companion-matrix eigenvalues (batched over w),
the physical one picked by the sign condition and, when that is not decisive,
by continuation from w = Re w + 10i down to the requested height.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize

from hyperlab.core.config import DERIV_GUARD, FD_STEP, MDE_MAX_ITER, MDE_TOL, Z_MAX
from hyperlab.core.errors import (
    BranchAmbiguityError,
    ConfigError,
    DomainError,
    NumericalError,
    SingularDerivativeError,
    SolverFailure,
)

LOG = logging.getLogger("hyperlab.mde")

CONTINUATION_START = 10.0
CONTINUATION_RATIO = 1.3
BOUNDARY_STEP = 0.02
IM_TOL = 1e-10


# ---------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class MdePoint:
    z: complex
    w: complex
    m: complex
    u: complex
    boundary: bool = False

    @property
    def M(self) -> np.ndarray:
        return M_matrix(self.z, self.m, self.u)

    @property
    def trace_M2(self) -> complex:
        return self.m * self.m + abs(self.z) ** 2 * self.u * self.u

    @property
    def dm_dw(self) -> complex:
        return derivatives(self)[0]

    @property
    def du_dw(self) -> complex:
        return derivatives(self)[1]

    @property
    def eta(self) -> float:
        return abs(self.w.imag)

    def residual(self) -> float:
        return mde_residual(self.m, self.z, self.w)


@dataclass(frozen=True)
class DensityProfile:
    """Self-consistent density of the symmetrized singular values of X - z."""

    z: complex

    def rho_at(self, E: float) -> float:
        return density(self.z, E)

    def bulk(self, kappa: float) -> List[Tuple[float, float]]:
        return bulk_intervals(self.z, kappa)

    def quantiles(self, N: int) -> np.ndarray:
        return quantiles(self.z, N)

    @property
    def edge(self) -> float:
        return edge(self.z)


# ---------------------------------------------------------------------
# Cubic helpers
# ---------------------------------------------------------------------
def M_matrix(z: complex, m: complex, u: complex) -> np.ndarray:
    z = complex(z)
    return np.array([[m, -z * u], [-z.conjugate() * u, m]], dtype=complex)


def mde_residual(m: complex, z: complex, w: complex) -> float:
    q = abs(z) ** 2
    return float(abs(1.0 / m + w + m - q / (w + m)))


def _cubic_coeffs(w: np.ndarray, q: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return 2.0 * w, w * w + 1.0 - q, w


def cubic_roots(w, q: float) -> np.ndarray:
    """All three roots of the cleared MDE for each w; shape (..., 3)."""
    w = np.asarray(w, dtype=complex)
    a2, a1, a0 = _cubic_coeffs(w, q)
    comp = np.zeros(w.shape + (3, 3), dtype=complex)
    comp[..., 0, 0] = -a2
    comp[..., 0, 1] = -a1
    comp[..., 0, 2] = -a0
    comp[..., 1, 0] = 1.0
    comp[..., 2, 1] = 1.0
    return np.linalg.eigvals(comp)


def _polish(m: complex, w: complex, q: float, tol: float, max_iter: int) -> complex:
    c1 = w * w + 1.0 - q
    for _ in range(max_iter):
        f = ((m + 2.0 * w) * m + c1) * m + w
        df = (3.0 * m + 4.0 * w) * m + c1
        if df == 0:
            break
        step = f / df
        m = m - step
        if abs(step) <= 1e-16 * max(1.0, abs(m)):
            break
    return m


def _continue_in_eta(E: float, eta: float, q: float) -> complex:
    """Track the physical root from E + 10i down to E + i*eta (eta > 0)."""
    top = max(CONTINUATION_START, eta)
    n = max(1, int(np.ceil(np.log(top / eta) / np.log(CONTINUATION_RATIO))))
    etas = np.geomspace(top, eta, n + 1)
    roots = cubic_roots(E + 1j * etas, q)
    first = roots[0]
    valid = first[first.imag > 0]
    if valid.size == 0:
        raise SolverFailure("no root in the upper half plane at the continuation start", 0j, E + 1j * top)
    m = valid[np.argmax(valid.imag)]
    for k in range(1, n + 1):
        row = roots[k]
        m = row[np.argmin(np.abs(row - m))]
    return complex(m)


def _continue_in_energy(E: float, q: float, start: complex) -> complex:
    """Track the boundary root along the real axis from E = 0."""
    n = max(1, int(np.ceil(abs(E) / BOUNDARY_STEP)))
    grid = np.linspace(0.0, E, n + 1)
    roots = cubic_roots(grid.astype(complex), q)
    m = start
    for k in range(1, n + 1):
        row = roots[k]
        upper = row[row.imag > IM_TOL]
        if upper.size == 1:
            m = upper[0]
        else:
            m = row[np.argmin(np.abs(row - m))]
    return complex(m)


def _boundary_root(z: complex, E: float, q: float, anchor: Optional[complex]) -> complex:
    roots = cubic_roots(np.array([E], dtype=complex), q)[0]
    upper = roots[roots.imag > IM_TOL]
    if upper.size == 1:
        return complex(upper[0])
    if anchor is not None:
        return complex(roots[np.argmin(np.abs(roots - anchor))])
    if q < 1.0:
        start = 1j * np.sqrt(1.0 - q)
        return _continue_in_energy(E, q, start)
    raise BranchAmbiguityError(
        f"boundary value at z={z}, E={E} lies where the density vanishes; supply a continuation anchor"
    )


# ---------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------
def solve_mde(
    z: complex,
    w: complex,
    boundary: bool = False,
    anchor: Optional[complex] = None,
    tol: float = MDE_TOL,
    max_iter: int = MDE_MAX_ITER,
) -> MdePoint:
    """
    Solve the scalar MDE at (z, w).

    With ``boundary=True`` the real part of w is used and m is the limit
    from the upper half plane (Im m >= 0). ``anchor`` overrides branch
    selection by picking the root closest to it.
    """
    z = complex(z)
    w = complex(w)
    q = abs(z) ** 2

    if boundary:
        w = complex(w.real, 0.0)
        m = _boundary_root(z, w.real, q, anchor)
    elif w.imag == 0.0:
        raise ConfigError(f"real spectral parameter w={w} needs boundary=True")
    elif w.imag < 0:
        conj_anchor = None if anchor is None else complex(anchor).conjugate()
        pt = solve_mde(z, w.conjugate(), anchor=conj_anchor, tol=tol, max_iter=max_iter)
        return MdePoint(z=z, w=w, m=pt.m.conjugate(), u=pt.u.conjugate())
    else:
        roots = cubic_roots(np.array([w]), q)[0]
        valid = roots[roots.imag > 0]
        if anchor is not None and valid.size:
            m = complex(valid[np.argmin(np.abs(valid - anchor))])
        elif valid.size == 1:
            m = complex(valid[0])
        else:
            m = _continue_in_eta(w.real, w.imag, q)

    m = _polish(m, w, q, tol, max_iter)
    res = mde_residual(m, z, w)
    if not np.isfinite(res) or res > tol:
        raise SolverFailure("MDE residual above tolerance", z, w, res)
    if (not boundary and m.imag <= 0) or (boundary and m.imag < -IM_TOL):
        raise SolverFailure("root left the physical branch", z, w, res)
    if boundary and m.imag < 0:
        m = complex(m.real, 0.0)
    u = m / (w + m)
    return MdePoint(z=z, w=w, m=complex(m), u=complex(u), boundary=boundary)


# ---------------------------------------------------------------------
# Derivatives
# ---------------------------------------------------------------------
def _stability_denominator(point: MdePoint) -> complex:
    denom = 1.0 - point.trace_M2
    if abs(denom) <= DERIV_GUARD:
        raise SingularDerivativeError(
            f"|1 - <M^2>| = {abs(denom):.3e} at z={point.z}, w={point.w}"
        )
    return denom


def derivatives(point: MdePoint) -> Tuple[complex, complex]:
    """(dm/dw, du/dw) from the closed forms <M^2>/(1-<M^2>) and 2mu/(1-<M^2>)."""
    denom = _stability_denominator(point)
    dm = point.trace_M2 / denom
    du = 2.0 * point.m * point.u / denom
    return complex(dm), complex(du)


def directional_z_derivative(point: MdePoint, direction: complex) -> complex:
    """d m / d z along the unit direction zeta."""
    zeta = complex(direction)
    if abs(zeta) == 0:
        raise ConfigError("direction must be a nonzero complex number")
    zeta = zeta / abs(zeta)
    denom = _stability_denominator(point)
    return complex(-2.0 * (point.z.conjugate() * zeta).real * point.m * point.u / denom)


def m_derivative_fd(z: complex, w: complex, step: Optional[float] = None) -> Tuple[complex, complex]:
    """Central finite differences of (m, u) in w; test oracle."""
    base = solve_mde(z, w)
    h = step if step is not None else FD_STEP * max(abs(complex(w).imag), 1.0)
    plus = solve_mde(z, w + h, anchor=base.m)
    minus = solve_mde(z, w - h, anchor=base.m)
    return (plus.m - minus.m) / (2 * h), (plus.u - minus.u) / (2 * h)


def z_derivative_fd(z: complex, w: complex, direction: complex, step: float = FD_STEP) -> complex:
    base = solve_mde(z, w)
    zeta = complex(direction) / abs(direction)
    plus = solve_mde(z + step * zeta, w, anchor=base.m)
    minus = solve_mde(z - step * zeta, w, anchor=base.m)
    return (plus.m - minus.m) / (2 * step)


# ---------------------------------------------------------------------
# Density, edge, bulk, quantiles
# ---------------------------------------------------------------------
def check_bulk_z(z: complex, z_max: float = Z_MAX) -> None:
    if abs(z) > z_max:
        raise DomainError(f"|z| = {abs(z):.4f} exceeds the bulk guard {z_max}")


def edge(z: complex) -> float:
    """
    Right edge of supp rho^z.

    The discriminant of the real cubic at w = E is the quadratic
    4q x^2 + B x - 4p^3 in x = E^2 with p = 1 - q, B = 36p - 8p^2 - 27;
    the density is positive exactly where it is negative.
    """
    q = abs(complex(z)) ** 2
    p = 1.0 - q
    B = 36.0 * p - 8.0 * p * p - 27.0
    disc = B * B + 64.0 * q * p ** 3
    if disc < 0:
        raise NumericalError(f"density of z={z} has no real edge")
    if q == 0.0:
        return float(np.sqrt(4.0 * p ** 3 / B))
    if p > 0:
        x = 8.0 * p ** 3 / (B + np.sqrt(disc))
    else:
        x = (-B + np.sqrt(disc)) / (8.0 * q)
    return float(np.sqrt(x))


def density_array(z: complex, E) -> np.ndarray:
    """Vectorized rho^z on real energies (no Newton polish)."""
    E = np.atleast_1d(np.asarray(E, dtype=float))
    q = abs(complex(z)) ** 2
    roots = cubic_roots(E.astype(complex), q)
    im = roots.imag.max(axis=-1)
    out = np.where(im > IM_TOL, im, 0.0) / np.pi
    if q >= 1.0 and np.any(out == 0.0):
        raise BranchAmbiguityError(f"density at |z| = {np.sqrt(q):.3f} vanishes; branch undefined")
    return out


def density(z: complex, E: float) -> float:
    """rho^z(E) = |Im m^z(E + i0)| / pi, boundary value continued from E = 0."""
    E = float(E)
    q = abs(complex(z)) ** 2
    roots = cubic_roots(np.array([E], dtype=complex), q)[0]
    if not np.any(roots.imag > IM_TOL):
        if q < 1.0:
            return 0.0
        raise BranchAmbiguityError(f"density at z={z}, E={E} vanishes; branch undefined")
    pt = solve_mde(z, E, boundary=True)
    return abs(pt.m.imag) / np.pi


def bulk_intervals(z: complex, kappa: float, resolution: int = 2001) -> List[Tuple[float, float]]:
    """kappa-bulk {E : rho^z(E) >= kappa} as a sorted list of closed intervals."""
    e = edge(z)
    grid = np.linspace(-e, e, resolution)
    rho = density_array(z, grid)
    inside = rho >= kappa
    out: List[Tuple[float, float]] = []
    if not inside.any():
        return out

    def cross(a: float, b: float) -> float:
        return optimize.brentq(lambda x: density(z, x) - kappa, a, b, xtol=1e-13)

    k = 0
    n = len(grid)
    while k < n:
        if not inside[k]:
            k += 1
            continue
        start = k
        while k + 1 < n and inside[k + 1]:
            k += 1
        lo = grid[start] if start == 0 else cross(grid[start - 1], grid[start])
        hi = grid[k] if k == n - 1 else cross(grid[k], grid[k + 1])
        out.append((float(lo), float(hi)))
        k += 1
    return out


def in_bulk(z: complex, E: float, kappa: float) -> bool:
    return density(z, abs(E)) >= kappa


def _integrate(z: complex, a: float, b: float) -> float:
    val, _ = integrate.quad(
        lambda x: float(density_array(z, x)[0]), a, b, epsabs=1e-13, epsrel=1e-12, limit=200
    )
    return val


@lru_cache(maxsize=64)
def _cumulative_table(z: complex, nodes: int = 256) -> Tuple[np.ndarray, np.ndarray]:
    e = edge(z)
    s = np.linspace(0.0, 1.0, nodes + 1)
    grid = e * (1.0 - (1.0 - s) ** 2)
    pieces = [_integrate(z, grid[k - 1], grid[k]) for k in range(1, len(grid))]
    cum = np.concatenate([[0.0], np.cumsum(pieces)])
    return grid, cum


def cumulative_density(z: complex, E: float) -> float:
    """Integral of rho^z over [0, E] for 0 <= E <= edge."""
    grid, cum = _cumulative_table(complex(z))
    E = min(max(float(E), 0.0), grid[-1])
    k = int(np.searchsorted(grid, E, side="right")) - 1
    k = min(max(k, 0), len(grid) - 2)
    return float(cum[k] + _integrate(z, grid[k], E))


def _newton_quantile(z: complex, lo: float, hi: float, base: float, top: float, target: float) -> Optional[float]:
    """Safeguarded Newton on F(x) = target inside one table cell; None if it stalls."""
    x = lo + (hi - lo) * (target - base) / max(top - base, 1e-300)
    for _ in range(30):
        rho = float(density_array(z, x)[0])
        if rho <= 0.0:
            return None
        f = base + _integrate(z, lo, x) - target
        if abs(f) <= 1e-13:
            return float(x)
        x_new = x - f / rho
        if not lo <= x_new <= hi:
            return None
        x = x_new
    return None


@lru_cache(maxsize=32)
def _quantiles_cached(z: complex, N: int) -> Tuple[float, ...]:
    grid, cum = _cumulative_table(z)
    half = cum[-1]
    if abs(half - 0.5) > 1e-9:
        LOG.warning("density mass on [0, edge] is %.12f for z=%s (expected 1/2)", half, z)
    gammas = []
    for i in range(1, N + 1):
        target = i / (2.0 * N)
        if i == N:
            gammas.append(float(grid[-1]))
            continue
        k = int(np.searchsorted(cum, target, side="left"))
        k = min(max(k, 1), len(grid) - 1)
        lo, base = grid[k - 1], cum[k - 1]
        hi = grid[k]
        if base + _integrate(z, lo, hi) - target <= 0.0:
            gammas.append(float(hi))
            continue
        g = _newton_quantile(z, lo, hi, base, cum[k], target)
        if g is not None:
            gammas.append(g)
            continue
        try:
            g = optimize.brentq(
                lambda x: base + _integrate(z, lo, x) - target, lo, hi, xtol=1e-14, rtol=1e-14
            )
        except (ValueError, RuntimeError) as e:
            raise NumericalError(
                f"quantile root-finding failed at i={i}, N={N}, z={z}: {e} "
                f"(bracket [{lo:.6g}, {hi:.6g}], cumulative [{base:.3e}, {cum[k]:.3e}])"
            )
        gammas.append(float(g))
    return tuple(gammas)


def quantiles(z: complex, N: int, z_max: float = Z_MAX) -> np.ndarray:
    """
    Positive quantiles gamma_1 < ... < gamma_N of rho^z.

    The 2N eigenvalues of the Hermitization are spread by rho^z, hence
    int_0^{gamma_i} rho^z = i / (2N); gamma_N is the spectral edge and
    gamma_{-i} = -gamma_i.
    """
    if N < 1:
        raise ConfigError("N must be a positive integer")
    check_bulk_z(z, z_max)
    return np.array(_quantiles_cached(complex(z), int(N)))


def density_profile(z: complex) -> DensityProfile:
    return DensityProfile(z=complex(z))


def solve_grid(zs: Sequence[complex], ws: Sequence[complex], solver: Callable = solve_mde) -> List[MdePoint]:
    return [solver(z, w) for z in zs for w in ws]
