"""
Block-constant observables, self-energy and the two-body stability operator.

All (2N)x(2N) observables used by the lab are of the form A (x) I_N with A a
2x2 matrix in span{E+, E-, F, F*}; every operator here therefore acts on
2x2 matrices and the normalized trace <.> is tr/2.
"""

from __future__ import annotations

import cmath
import logging
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Optional, Tuple, Union

import numpy as np

from hyperlab.core.errors import ConfigError, DomainError
from hyperlab.services.mde_core import MdePoint, density, solve_mde

LOG = logging.getLogger("hyperlab.stability")

E_PLUS = np.eye(2, dtype=complex)
E_MINUS = np.diag([1.0, -1.0]).astype(complex)
F = np.array([[0, 1], [0, 0]], dtype=complex)
F_STAR = np.array([[0, 0], [1, 0]], dtype=complex)
BASIS = (E_PLUS, E_MINUS, F, F_STAR)
BASIS_NAMES = ("E+", "E-", "F", "F*")

DEFAULT_KAPPA = 0.05
SYMMETRY_CLASSES = ("complex", "real")


# ---------------------------------------------------------------------
# Observable
# ---------------------------------------------------------------------
class Observable:
    """Coefficients over (E+, E-, F, F*)."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable[complex]):
        c = np.asarray(list(coeffs), dtype=complex)
        if c.shape != (4,):
            raise ConfigError(f"an observable needs 4 coefficients, got shape {c.shape}")
        self.coeffs = c

    @classmethod
    def from_matrix(cls, A: np.ndarray) -> "Observable":
        A = np.asarray(A, dtype=complex)
        if A.shape != (2, 2):
            raise ConfigError(f"expected a 2x2 matrix, got {A.shape}")
        return cls([(A[0, 0] + A[1, 1]) / 2, (A[0, 0] - A[1, 1]) / 2, A[0, 1], A[1, 0]])

    @classmethod
    def named(cls, name: str) -> "Observable":
        try:
            idx = BASIS_NAMES.index(name)
        except ValueError:
            raise ConfigError(f"unknown observable {name!r}; expected one of {BASIS_NAMES}")
        c = np.zeros(4, dtype=complex)
        c[idx] = 1.0
        return cls(c)

    @property
    def as_matrix2(self) -> np.ndarray:
        return sum(c * B for c, B in zip(self.coeffs, BASIS))

    def expand(self, N: int) -> np.ndarray:
        return np.kron(self.as_matrix2, np.eye(N))

    def __add__(self, other: "Observable") -> "Observable":
        return Observable(self.coeffs + other.coeffs)

    def __mul__(self, scalar: complex) -> "Observable":
        return Observable(self.coeffs * scalar)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        terms = [f"{c:.4g}*{n}" for c, n in zip(self.coeffs, BASIS_NAMES) if c != 0]
        return "Observable(" + (" + ".join(terms) or "0") + ")"


Matrixish = Union[Observable, np.ndarray]


def as_matrix(R: Matrixish) -> np.ndarray:
    if isinstance(R, Observable):
        return R.as_matrix2
    R = np.asarray(R, dtype=complex)
    if R.shape != (2, 2):
        raise ConfigError(f"expected a 2x2 block-constant matrix, got {R.shape}")
    return R


def ntr(A: np.ndarray) -> complex:
    """Normalized trace <A> = tr(A)/2."""
    return complex(np.trace(A)) / 2.0


# ---------------------------------------------------------------------
# Self-energy
# ---------------------------------------------------------------------
def self_energy(R: Matrixish, symmetry_class: str = "complex", N: Optional[int] = None) -> Matrixish:
    """
    S[R] = <R E+> E+ - <R E-> E-; the real class adds
    (1/N) (E+ R^t E+ - E- R^t E-).
    """
    A = as_matrix(R)
    out = ntr(A @ E_PLUS) * E_PLUS - ntr(A @ E_MINUS) * E_MINUS
    if symmetry_class == "real":
        if N is None or N < 1:
            raise ConfigError("the real self-energy needs N >= 1")
        At = A.T
        out = out + (E_PLUS @ At @ E_PLUS - E_MINUS @ At @ E_MINUS) / N
    elif symmetry_class != "complex":
        raise ConfigError(f"unknown symmetry class {symmetry_class!r}")
    return Observable.from_matrix(out) if isinstance(R, Observable) else out


# ---------------------------------------------------------------------
# Stability operator
# ---------------------------------------------------------------------
@dataclass(frozen=True)
class StabilityState:
    z1: complex
    z2: complex
    w1: complex
    w2: complex
    p1: MdePoint
    p2: MdePoint
    beta_plus: complex
    beta_minus: complex
    beta_star: float
    beta_hat: float
    gamma: float
    lt: float

    @property
    def m1(self) -> complex:
        return self.p1.m

    @property
    def m2(self) -> complex:
        return self.p2.m

    @property
    def u1(self) -> complex:
        return self.p1.u

    @property
    def u2(self) -> complex:
        return self.p2.u


def solve_point(z: complex, w: complex) -> MdePoint:
    """MDE point; real w is read as the boundary value E + i0."""
    w = complex(w)
    return solve_mde(z, w, boundary=(w.imag == 0.0))


def apply_operator(R: Matrixish, M1: np.ndarray, M2: np.ndarray) -> np.ndarray:
    A = as_matrix(R)
    return A - M1 @ self_energy(A) @ M2


def stability_apply(R: Matrixish, state: StabilityState) -> Matrixish:
    """B12[R] = R - M1 S[R] M2."""
    out = apply_operator(R, state.p1.M, state.p2.M)
    return Observable.from_matrix(out) if isinstance(R, Observable) else out


def operator_matrix(M1: np.ndarray, M2: np.ndarray) -> np.ndarray:
    """4x4 representation of B12 on row-major vec(2x2)."""
    cols = []
    for k in range(4):
        unit = np.zeros(4, dtype=complex)
        unit[k] = 1.0
        cols.append(apply_operator(unit.reshape(2, 2), M1, M2).reshape(4))
    return np.column_stack(cols)


def _beta_from_points(p1: MdePoint, p2: MdePoint) -> Tuple[complex, complex]:
    zz = p1.z * p2.z.conjugate()
    uu = p1.u * p2.u
    root = cmath.sqrt(p1.m ** 2 * p2.m ** 2 - zz.imag ** 2 * uu ** 2)
    base = 1.0 - zz.real * uu
    return base + root, base - root


def beta_pm(z1: complex, z2: complex, w1: complex, w2: complex) -> Tuple[complex, complex]:
    """Nontrivial eigenvalues beta_+, beta_- of B12 (the other two equal 1)."""
    return _beta_from_points(solve_point(z1, w1), solve_point(z2, w2))


def _conjugate(p: MdePoint) -> MdePoint:
    if p.w.imag == 0.0:
        return p
    return MdePoint(z=p.z, w=p.w.conjugate(), m=p.m.conjugate(), u=p.u.conjugate(), boundary=p.boundary)


def _conjugation_choices(p1: MdePoint, p2: MdePoint):
    for a, b in product((False, True), repeat=2):
        yield (_conjugate(p1) if a else p1), (_conjugate(p2) if b else p2)


def beta_star(p1: MdePoint, p2: MdePoint) -> float:
    bp, bm = _beta_from_points(p1, p2)
    return float(min(abs(bp), abs(bm)))


def beta_hat_points(p1: MdePoint, p2: MdePoint) -> float:
    return float(min(min(beta_star(a, b), 1.0) for a, b in _conjugation_choices(p1, p2)))


def beta_hat(z1: complex, z2: complex, w1: complex, w2: complex) -> float:
    """min over w_j -> conj(w_j) of (beta_* ^ 1)."""
    return beta_hat_points(solve_point(z1, w1), solve_point(z2, w2))


def beta_hat_operator(z1: complex, z2: complex, w1: complex, w2: complex) -> float:
    """Smallest singular value of the 4x4 representation over the four conjugation choices."""
    p1, p2 = solve_point(z1, w1), solve_point(z2, w2)
    return float(
        min(np.linalg.svd(operator_matrix(a.M, b.M), compute_uv=False)[-1] for a, b in _conjugation_choices(p1, p2))
    )


def _lt_gamma(p1: MdePoint, p2: MdePoint) -> Tuple[float, float]:
    E1, E2 = p1.w.real, p2.w.real
    eta1, eta2 = abs(p1.w.imag), abs(p2.w.imag)
    ratio = p1.u.imag / p1.m.imag if p1.m.imag != 0 else 0.0
    lt = abs(E1) - abs(E2) - np.sign(E1) * ratio * (p1.z.conjugate() * (p1.z - p2.z)).real
    gamma = abs(p1.z - p2.z) ** 2 + abs(lt) + (abs(E1) - abs(E2)) ** 2 + eta1 + eta2
    return float(gamma), float(lt)


def _check_bulk(z: complex, w: complex, kappa: Optional[float]) -> None:
    w = complex(w)
    if kappa is None:
        return
    if density(z, abs(w.real)) < kappa:
        raise DomainError(f"E={w.real:.4g} is outside the {kappa}-bulk of rho^{z}")
    if abs(w.imag) > 1.0:
        raise DomainError(f"eta={abs(w.imag):.4g} exceeds 1")


def gamma_control(
    z1: complex, z2: complex, w1: complex, w2: complex, kappa: Optional[float] = DEFAULT_KAPPA
) -> Tuple[float, float]:
    """(gamma, LT); gamma uses |LT|, the signed LT is returned separately."""
    _check_bulk(z1, w1, kappa)
    _check_bulk(z2, w2, kappa)
    return _lt_gamma(solve_point(z1, w1), solve_point(z2, w2))


def gamma_hat(
    z1: complex, z2: complex, w1: complex, w2: complex, kappa: Optional[float] = DEFAULT_KAPPA
) -> float:
    """Real-class control parameter: min of gamma over z_j -> conj(z_j)."""
    z1, z2 = complex(z1), complex(z2)
    return min(
        gamma_control(a, b, w1, w2, kappa)[0]
        for a in (z1, z1.conjugate())
        for b in (z2, z2.conjugate())
    )


def stability_state(
    z1: complex, z2: complex, w1: complex, w2: complex, kappa: Optional[float] = None
) -> StabilityState:
    _check_bulk(z1, w1, kappa)
    _check_bulk(z2, w2, kappa)
    p1, p2 = solve_point(z1, w1), solve_point(z2, w2)
    bp, bm = _beta_from_points(p1, p2)
    gamma, lt = _lt_gamma(p1, p2)
    return StabilityState(
        z1=complex(z1),
        z2=complex(z2),
        w1=complex(w1),
        w2=complex(w2),
        p1=p1,
        p2=p2,
        beta_plus=bp,
        beta_minus=bm,
        beta_star=float(min(abs(bp), abs(bm))),
        beta_hat=beta_hat_points(p1, p2),
        gamma=gamma,
        lt=lt,
    )


def eigenvalue_mismatch(state: StabilityState) -> float:
    """Max distance between {beta+, beta-, 1, 1} and the numerical 4x4 spectrum."""
    numeric = list(np.linalg.eigvals(operator_matrix(state.p1.M, state.p2.M)))
    worst = 0.0
    for target in (state.beta_plus, state.beta_minus, 1.0, 1.0):
        k = int(np.argmin([abs(x - target) for x in numeric]))
        worst = max(worst, abs(numeric.pop(k) - target))
    return worst
