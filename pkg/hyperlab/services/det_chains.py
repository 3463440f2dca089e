"""
Deterministic approximations of resolvent chains and covariance predictors.

Everything here is exact 2x2 arithmetic on MDE solutions: the two-body
stability operator is inverted through the 2x2 system for (<X>, <X E->),
chains are built recursively from those inverses, and the covariance leading
term is the mixed w-derivative of -1/2 log D with D in closed form.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from hyperlab.core.config import FD_STEP
from hyperlab.core.errors import ConfigError, LogSingularityError, NumericalError, StabilityDegenerateError
from hyperlab.services.mde_core import MdePoint, derivatives, solve_mde
from hyperlab.services.stability import E_MINUS, E_PLUS, Matrixish, as_matrix, ntr, self_energy, solve_point

LOG = logging.getLogger("hyperlab.chains")

P_GUARD = 1e-14
D_GUARD = 1e-12
MAX_CHAIN = 6


# ---------------------------------------------------------------------
# kappa_4 registry
# ---------------------------------------------------------------------
# Fourth moments E|chi|^4 of the unit-variance entry laws.
#   complex gaussian   : |chi|^2 ~ Exp(1)                          -> 2
#   complex bernoulli  : (+-1 +- i)/sqrt(2), |chi| = 1             -> 1
#   complex uniform    : Re, Im iid U(-sqrt(3/2), sqrt(3/2))       -> 2*9/20 + 2*1/4 = 1.4
#   real gaussian      : N(0, 1)                                   -> 3
#   real bernoulli     : +-1                                       -> 1
#   real uniform       : U(-sqrt(3), sqrt(3))                      -> 9/5
#   custom             : |chi| in {0, a}, P(|chi| = a) = 1/a^2     -> a^2 = mu4
FOURTH_MOMENTS: Dict[Tuple[str, str], float] = {
    ("complex", "gaussian"): 2.0,
    ("complex", "bernoulli"): 1.0,
    ("complex", "uniform"): 1.4,
    ("real", "gaussian"): 3.0,
    ("real", "bernoulli"): 1.0,
    ("real", "uniform"): 1.8,
}
KAPPA4_SHIFT = {"complex": 2.0, "real": 3.0}


def kappa4_for(symmetry_class: str, entry_law: str, mu4: Optional[float] = None, gauss_mixing: float = 0.0) -> float:
    """
    Normalized fourth cumulant of the entry law: E|chi|^4 - 2 (complex) or
    E|chi|^4 - 3 (real). Gauss-divisible mixing scales it by (1 - s^2)^2.
    """
    if symmetry_class not in KAPPA4_SHIFT:
        raise ConfigError(f"unknown symmetry class {symmetry_class!r}")
    if entry_law == "custom":
        if mu4 is None or mu4 < 1.0:
            raise ConfigError("custom entry law needs a fourth moment mu4 >= 1")
        moment = float(mu4)
    else:
        try:
            moment = FOURTH_MOMENTS[(symmetry_class, entry_law)]
        except KeyError:
            raise ConfigError(f"unknown entry law {entry_law!r}")
    s2 = float(gauss_mixing) ** 2
    return (moment - KAPPA4_SHIFT[symmetry_class]) * (1.0 - s2) ** 2


# ---------------------------------------------------------------------
# Stability inverse and chains
# ---------------------------------------------------------------------
def a_matrix(point: MdePoint) -> np.ndarray:
    """A = (1 - <M^2>)^{-1} M."""
    denom = 1.0 - point.trace_M2
    if abs(denom) <= P_GUARD:
        raise StabilityDegenerateError(f"1 - <M^2> vanishes at z={point.z}, w={point.w}")
    return point.M / denom


def stability_inverse(R: Matrixish, M1: np.ndarray, M2: np.ndarray) -> np.ndarray:
    """Solve X - M1 S[X] M2 = R for X."""
    R = as_matrix(R)
    M1M2 = M1 @ M2
    M1EM2 = M1 @ E_MINUS @ M2
    P = np.array(
        [
            [1.0 - ntr(M1M2), ntr(M1EM2)],
            [-ntr(M1M2 @ E_MINUS), 1.0 + ntr(M1EM2 @ E_MINUS)],
        ],
        dtype=complex,
    )
    det = P[0, 0] * P[1, 1] - P[0, 1] * P[1, 0]
    if abs(det) <= P_GUARD:
        raise StabilityDegenerateError(f"|det P| = {abs(det):.3e}; increase eta")
    x, y = np.linalg.solve(P, np.array([ntr(R), ntr(R @ E_MINUS)], dtype=complex))
    return R + x * M1M2 - y * M1EM2


def m12(B: Matrixish, z1: complex, z2: complex, w1: complex, w2: complex) -> np.ndarray:
    """M_12^B = B_12^{-1}[M1 B M2]."""
    p1, p2 = solve_point(z1, w1), solve_point(z2, w2)
    return stability_inverse(p1.M @ as_matrix(B) @ p2.M, p1.M, p2.M)


@dataclass
class ChainApprox:
    params: List[Tuple[complex, complex]]
    observables: List[np.ndarray]
    value: np.ndarray
    norm: float = field(init=False)

    def __post_init__(self):
        self.norm = float(np.linalg.norm(self.value, 2))

    @property
    def order(self) -> int:
        return len(self.params)

    @property
    def eta_star(self) -> float:
        return min([abs(complex(w).imag) for _, w in self.params] + [1.0])

    def trace_with(self, B: Matrixish) -> complex:
        return ntr(self.value @ as_matrix(B))


def m_chain(params: Sequence[Tuple[complex, complex]], observables: Sequence[Matrixish]) -> ChainApprox:
    """
    Deterministic approximation of G_1 B_1 G_2 ... B_{k-1} G_k.

    M(i, i) = M_i and
    M(i, j) = B_ij^{-1}[ M_i B_i M(i+1, j) + sum_{i<l<j} M_i S[M(i, l)] M(l, j) ].
    """
    k = len(params)
    if k < 1 or k > MAX_CHAIN:
        raise ConfigError(f"chain length must be in [1, {MAX_CHAIN}], got {k}")
    if len(observables) != k - 1:
        raise ConfigError(f"a chain of {k} resolvents takes {k - 1} observables, got {len(observables)}")
    Ms = [solve_point(z, w).M for z, w in params]
    Bs = [as_matrix(B) for B in observables]

    @lru_cache(maxsize=None)
    def chain(i: int, j: int) -> np.ndarray:
        if i == j:
            return Ms[i]
        rhs = Ms[i] @ Bs[i] @ chain(i + 1, j)
        for l in range(i + 1, j):
            rhs = rhs + Ms[i] @ self_energy(chain(i, l)) @ chain(l, j)
        return stability_inverse(rhs, Ms[i], Ms[j])

    value = chain(0, k - 1)
    return ChainApprox(
        params=[(complex(z), complex(w)) for z, w in params],
        observables=Bs,
        value=value,
    )


def deterministic_power_trace(z: complex, w: complex, power: int) -> complex:
    """Deterministic counterpart of <G^power>: chain of identical legs with E+ insertions."""
    return ntr(m_chain([(z, w)] * power, [E_PLUS] * (power - 1)).value)


def deterministic_e_minus_chain(z: complex, w: complex, length: int) -> complex:
    """Deterministic counterpart of <(G E-)^length>."""
    chain = m_chain([(z, w)] * length, [E_MINUS] * (length - 1))
    return chain.trace_with(E_MINUS)


# ---------------------------------------------------------------------
# E- identities
# ---------------------------------------------------------------------
def e_minus_identity_rhs(traces: Sequence[complex], n: int, w: complex) -> complex:
    """
    <(G E-)^{2n}> expressed through traces[s] = <G^{s+1}>:
    2 sum_{s<n} (-1)^{s+1} binom(2n-2-s, n-1) <G^{s+1}> / (2w)^{2n-s-1}.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    if len(traces) < n:
        raise ConfigError(f"need {n} power traces, got {len(traces)}")
    w = complex(w)
    total = 0j
    for s in range(n):
        total += (-1) ** (s + 1) * comb(2 * n - 2 - s, n - 1) * traces[s] / (2 * w) ** (2 * n - s - 1)
    return 2.0 * total


# ---------------------------------------------------------------------
# Covariance predictor
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class CovPredictor:
    z1: complex
    z2: complex
    w1: complex
    w2: complex
    V12: complex
    U1: complex
    U2: complex
    kappa4: float
    symmetry_class: str
    N: int
    value: complex


def _log_d_terms(p1: MdePoint, p2: MdePoint) -> Tuple[complex, complex, complex, complex]:
    """D and its first and mixed w-derivatives along the MDE solutions."""
    m1, u1, m2, u2 = p1.m, p1.u, p2.m, p2.u
    A = abs(p1.z) ** 2 * abs(p2.z) ** 2
    c = (p1.z * p2.z.conjugate()).real
    D = 1.0 + u1 * u1 * u2 * u2 * A - m1 * m1 * m2 * m2 - 2.0 * u1 * u2 * c
    if abs(D) <= D_GUARD:
        raise LogSingularityError(f"|D| = {abs(D):.3e} at w1={p1.w}, w2={p2.w}")
    dm1, du1 = derivatives(p1)
    dm2, du2 = derivatives(p2)
    D1 = -2.0 * m1 * m2 * m2 * dm1 + (2.0 * u1 * u2 * u2 * A - 2.0 * u2 * c) * du1
    D2 = -2.0 * m1 * m1 * m2 * dm2 + (2.0 * u1 * u1 * u2 * A - 2.0 * u1 * c) * du2
    D12 = -4.0 * m1 * m2 * dm1 * dm2 + (4.0 * u1 * u2 * A - 2.0 * c) * du1 * du2
    return D, D1, D2, D12


def v12(z1: complex, z2: complex, w1: complex, w2: complex) -> complex:
    """V_12 = -1/2 d_{w1} d_{w2} log D."""
    D, D1, D2, D12 = _log_d_terms(solve_point(z1, w1), solve_point(z2, w2))
    return complex(-0.5 * (D12 / D - D1 * D2 / (D * D)))


def v12_fd(z1: complex, z2: complex, w1: complex, w2: complex, step: Optional[float] = None) -> complex:
    """Nested central differences of -1/2 log D; test oracle for v12."""
    w1, w2 = complex(w1), complex(w2)
    h = step if step is not None else FD_STEP * max(abs(w1.imag), abs(w2.imag), 1.0)
    base1, base2 = solve_point(z1, w1).m, solve_point(z2, w2).m

    def d_at(a: complex, b: complex) -> complex:
        p1 = solve_mde(z1, a, anchor=base1)
        p2 = solve_mde(z2, b, anchor=base2)
        return _log_d_terms(p1, p2)[0]

    ratio = (d_at(w1 + h, w2 + h) * d_at(w1 - h, w2 - h)) / (d_at(w1 + h, w2 - h) * d_at(w1 - h, w2 + h))
    return complex(-0.5 * np.log(ratio) / (4.0 * h * h))


def u_term(z: complex, w: complex) -> complex:
    """U = -(1/sqrt 2) d_w m^2 = -sqrt(2) m dm/dw."""
    p = solve_point(z, w)
    return complex(-np.sqrt(2.0) * p.m * derivatives(p)[0])


def cov_predict(
    z1: complex,
    z2: complex,
    w1: complex,
    w2: complex,
    kappa4: float = 0.0,
    symmetry_class: str = "complex",
    N: int = 1,
) -> CovPredictor:
    """Leading term (V_12 + kappa4 U_1 U_2) / (2 N^2); the real class uses V(z1, z2) + V(z1, conj z2)."""
    if N < 1:
        raise ConfigError("N must be >= 1")
    z1, z2 = complex(z1), complex(z2)
    V = v12(z1, z2, w1, w2)
    if symmetry_class == "real":
        V = V + v12(z1, z2.conjugate(), w1, w2)
    elif symmetry_class != "complex":
        raise ConfigError(f"unknown symmetry class {symmetry_class!r}")
    U1, U2 = u_term(z1, w1), u_term(z2, w2)
    value = (V + kappa4 * U1 * U2) / (2.0 * N * N)
    return CovPredictor(
        z1=z1,
        z2=z2,
        w1=complex(w1),
        w2=complex(w2),
        V12=V,
        U1=U1,
        U2=U2,
        kappa4=float(kappa4),
        symmetry_class=symmetry_class,
        N=int(N),
        value=complex(value),
    )


# ---------------------------------------------------------------------
# Smooth-statistics variance
# ---------------------------------------------------------------------
def _polar(r: float, theta: float) -> complex:
    return r * complex(np.cos(theta), np.sin(theta))


def vf_functional(f, kappa4: float = 0.0, epsabs: float = 1e-11, epsrel: float = 1e-9) -> float:
    """
    V_f = (1/4 pi^2) int_D |grad f|^2
          + kappa4 |(1/pi) int_D f - (1/2 pi) int_0^{2pi} f(e^{i theta}) d theta|^2.

    ``f`` exposes vectorized ``value(z)`` and ``gradient(z)`` (the latter as
    the complex number f_x + i f_y).
    """

    def grad_sq(r: float, theta: float) -> float:
        g = f.gradient(np.array([_polar(r, theta)]))[0]
        return float(abs(g) ** 2) * r

    def val(r: float, theta: float) -> float:
        return float(f.value(np.array([_polar(r, theta)]))[0]) * r

    r_split = _radial_breaks(f)
    energy = 0.0
    area_int = 0.0
    for lo, hi in zip(r_split[:-1], r_split[1:]):
        e, _ = integrate.dblquad(grad_sq, 0.0, 2 * np.pi, lo, hi, epsabs=epsabs, epsrel=epsrel)
        a, _ = integrate.dblquad(val, 0.0, 2 * np.pi, lo, hi, epsabs=epsabs, epsrel=epsrel)
        energy += e
        area_int += a
    circle, _ = integrate.quad(
        lambda t: float(f.value(np.array([complex(np.cos(t), np.sin(t))]))[0]),
        0.0,
        2 * np.pi,
        epsabs=epsabs,
        epsrel=epsrel,
        limit=200,
    )
    if not np.isfinite(energy) or not np.isfinite(area_int):
        raise NumericalError("V_f quadrature produced a non-finite value")
    gap = area_int / np.pi - circle / (2 * np.pi)
    return float(energy / (4 * np.pi ** 2) + kappa4 * gap * gap)


def _radial_breaks(f) -> List[float]:
    """Split [0, 1] at the radii where f changes character."""
    pts = {0.0, 1.0}
    pts.update(float(r) for r in getattr(f, "breaks", ()) if 0.0 < r < 1.0)
    return sorted(pts)


def vf_grid_oracle(f, kappa4: float = 0.0, n_r: int = 800, n_theta: int = 800) -> float:
    """Polar midpoint Riemann sum for V_f; independent check of vf_functional."""
    r = (np.arange(n_r) + 0.5) / n_r
    th = (np.arange(n_theta) + 0.5) * 2 * np.pi / n_theta
    R, TH = np.meshgrid(r, th, indexing="ij")
    Z = R * np.exp(1j * TH)
    dA = (1.0 / n_r) * (2 * np.pi / n_theta) * R
    energy = float(np.sum(np.abs(f.gradient(Z.ravel())) ** 2 * dA.ravel()))
    area_int = float(np.sum(f.value(Z.ravel()) * dA.ravel()))
    circle = float(np.mean(f.value(np.exp(1j * th)))) * 2 * np.pi
    gap = area_int / np.pi - circle / (2 * np.pi)
    return energy / (4 * np.pi ** 2) + kappa4 * gap * gap
