"""
Test functions (bump, mollified indicators, envelopes) and Girko's
Hermitized formula evaluated from singular values.

For a test function f and a sample X,

    sum_i f(sigma_i) = (1/4pi) int Delta f(z) sum_j log(lambda_j(X - z)^2) d^2z,

and the eta-regularized form splits the log into J_T and four eta-integrals
I_a^b, each of which is a closed-form sum over the singular values.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import linalg

from hyperlab.core.errors import ConfigError, DomainError, SingularIntegralError
from hyperlab.schemas import DomainShape, DomainSpec, TestFunctionKind, TestFunctionSpec
from hyperlab.services.spectra import Spectrum

LOG = logging.getLogger("hyperlab.girko")

MIN_POINTS_PER_EPS = 8
RADIAL_NODES = 64
POLAR_RHO_NODES = 48
POLAR_THETA_NODES = 96

ArrayFn = Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------
# Bump
# ---------------------------------------------------------------------
def bump(rho: np.ndarray) -> np.ndarray:
    """g(rho) = exp(-1/(1 - rho^2)) on rho < 1, 0 outside."""
    rho = np.asarray(rho, dtype=float)
    q = 1.0 - rho * rho
    safe = np.where(q > 0, q, 1.0)
    return np.where(q > 0, np.exp(-1.0 / safe), 0.0)


def bump_d1(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    q = 1.0 - rho * rho
    safe = np.where(q > 0, q, 1.0)
    return np.where(q > 0, -2.0 * rho * bump(rho) / safe ** 2, 0.0)


def bump_laplacian(rho: np.ndarray) -> np.ndarray:
    """Radial Laplacian g'' + g'/rho."""
    rho = np.asarray(rho, dtype=float)
    q = 1.0 - rho * rho
    safe = np.where(q > 0, q, 1.0)
    r2 = rho * rho
    return np.where(q > 0, bump(rho) * (-4.0 / safe ** 2 + 4.0 * r2 / safe ** 4 - 8.0 * r2 / safe ** 3), 0.0)


@lru_cache(maxsize=None)
def _gauss_legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def bump_mass() -> float:
    """2 pi int_0^1 g(rho) rho d rho; the mollifier is g / bump_mass()."""
    x, w = _gauss_legendre(200)
    return float(2.0 * np.pi * np.sum(w * bump(x) * x))


def mollifier(z: np.ndarray, eps: float) -> np.ndarray:
    """omega_eps(z) = eps^-2 g(|z|/eps) / mass."""
    return bump(np.abs(z) / eps) / (bump_mass() * eps * eps)


# ---------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------
def _box_sdf(z: np.ndarray, half_w: float, half_h: float) -> np.ndarray:
    dx = np.abs(z.real) - half_w
    dy = np.abs(z.imag) - half_h
    outside = np.hypot(np.maximum(dx, 0.0), np.maximum(dy, 0.0))
    inside = np.minimum(np.maximum(dx, dy), 0.0)
    return outside + inside


def _half_plane_sdf(z: np.ndarray, normal_angle: float, offset: float) -> np.ndarray:
    """Signed distance to {Re(e^{-i phi} z) <= offset}."""
    return (z * np.exp(-1j * normal_angle)).real - offset


def _wedge_sdf(z: np.ndarray, theta0: float, theta1: float) -> np.ndarray:
    """Conservative signed distance to the wedge theta0 <= arg z <= theta1."""
    span = theta1 - theta0
    if span <= np.pi:
        h0 = _half_plane_sdf(z, theta0 - np.pi / 2, 0.0)
        h1 = _half_plane_sdf(z, theta1 + np.pi / 2, 0.0)
        return np.maximum(h0, h1)
    h0 = _half_plane_sdf(z, theta0 + np.pi / 2, 0.0)
    h1 = _half_plane_sdf(z, theta1 - np.pi / 2, 0.0)
    return -np.maximum(h0, h1)


@dataclass(frozen=True)
class Domain:
    """A concrete domain Omega_N; ``offset`` shifts the level set to {sdf < offset}."""

    shape: DomainShape
    center: complex
    radius: float = 0.0
    width: float = 0.0
    height: float = 0.0
    r_inner: float = 0.0
    r_outer: float = 0.0
    theta_start: float = 0.0
    theta_end: float = 0.0
    clip_offset: float = 0.0
    clip_angle: float = 0.0
    offset: float = 0.0

    def base_sdf(self, z: np.ndarray) -> np.ndarray:
        w = np.asarray(z, dtype=complex) - self.center
        if self.shape == DomainShape.DISK:
            return np.abs(w) - self.radius
        if self.shape == DomainShape.RECTANGLE:
            return _box_sdf(w, self.width / 2, self.height / 2)
        if self.shape == DomainShape.ANNULUS_SECTOR:
            r = np.abs(w)
            ring = np.maximum(self.r_inner - r, r - self.r_outer)
            return np.maximum(ring, _wedge_sdf(w, self.theta_start, self.theta_end))
        if self.shape == DomainShape.HALF_PLANE_CLIPPED_DISK:
            return np.maximum(np.abs(w) - self.radius, _half_plane_sdf(w, self.clip_angle, self.clip_offset))
        raise ConfigError(f"unknown shape {self.shape!r}")

    def sdf(self, z: np.ndarray) -> np.ndarray:
        """Signed distance (negative inside); exact or conservative toward the boundary."""
        return self.base_sdf(z) - self.offset

    def indicator(self, z: np.ndarray) -> np.ndarray:
        return (self.sdf(z) < 0.0).astype(float)

    def offset_by(self, delta: float) -> "Domain":
        return replace(self, offset=self.offset + delta)

    @property
    def is_disk(self) -> bool:
        return self.shape == DomainShape.DISK

    @property
    def effective_radius(self) -> float:
        return self.radius + self.offset

    @property
    def area(self) -> float:
        if self.offset != 0.0 and not self.is_disk:
            raise ConfigError("area is only tabulated for unshifted non-disk domains")
        if self.is_disk:
            return math.pi * self.effective_radius ** 2
        if self.shape == DomainShape.RECTANGLE:
            return self.width * self.height
        if self.shape == DomainShape.ANNULUS_SECTOR:
            return 0.5 * (self.theta_end - self.theta_start) * (self.r_outer ** 2 - self.r_inner ** 2)
        R, d = self.radius, self.clip_offset
        if d >= R:
            return math.pi * R * R
        return math.pi * R * R - (R * R * math.acos(d / R) - d * math.sqrt(R * R - d * d))

    @property
    def perimeter(self) -> float:
        if self.is_disk:
            return 2 * math.pi * self.effective_radius
        if self.shape == DomainShape.RECTANGLE:
            return 2 * (self.width + self.height)
        if self.shape == DomainShape.ANNULUS_SECTOR:
            span = self.theta_end - self.theta_start
            return span * (self.r_outer + self.r_inner) + 2 * (self.r_outer - self.r_inner)
        R, d = self.radius, self.clip_offset
        if d >= R:
            return 2 * math.pi * R
        return 2 * R * (math.pi - math.acos(d / R)) + 2 * math.sqrt(R * R - d * d)

    @property
    def inradius(self) -> float:
        if self.is_disk:
            return self.effective_radius
        if self.shape == DomainShape.RECTANGLE:
            base = min(self.width, self.height) / 2
        elif self.shape == DomainShape.ANNULUS_SECTOR:
            half_span = min((self.theta_end - self.theta_start) / 2, np.pi / 2)
            r_mid = (self.r_outer + self.r_inner) / 2
            base = min((self.r_outer - self.r_inner) / 2, r_mid * math.sin(half_span))
        else:
            R, d = self.radius, self.clip_offset
            base = R if d >= R else (R + d) / 2
        return base + self.offset

    @property
    def bounding_radius(self) -> float:
        """Radius around ``center`` enclosing the shifted domain."""
        if self.shape == DomainShape.RECTANGLE:
            base = math.hypot(self.width, self.height) / 2
        elif self.shape == DomainShape.ANNULUS_SECTOR:
            base = self.r_outer
        else:
            base = self.radius
        return base + max(self.offset, 0.0)


def build_domain(spec: DomainSpec, N: int) -> Domain:
    """Omega_N: the base shape with every length scaled by N^-alpha about its center."""
    s = float(N) ** (-spec.alpha)
    R = spec.radius * s
    d = spec.clip_offset * s
    if spec.shape == DomainShape.HALF_PLANE_CLIPPED_DISK and d <= -R:
        raise DomainError("the clipping half-plane removes the whole disk")
    dom = Domain(
        shape=spec.shape,
        center=complex(spec.center),
        radius=R,
        width=spec.width * s,
        height=spec.height * s,
        r_inner=spec.r_inner * s,
        r_outer=spec.r_outer * s,
        theta_start=spec.theta_start,
        theta_end=spec.theta_end,
        clip_offset=d,
        clip_angle=spec.clip_angle,
    )
    reach = abs(dom.center) + dom.bounding_radius
    if reach >= 1.0:
        LOG.warning("domain reaches |z| = %.3f, outside the bulk of the circular law", reach)
    return dom


# ---------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------
@dataclass
class TestFunction:
    """f with vectorized value, gradient (as f_x + i f_y) and Laplacian."""

    __test__ = False

    value_fn: ArrayFn
    gradient_fn: ArrayFn
    laplacian_fn: ArrayFn
    center: complex
    radius: float
    a: float
    tag: TestFunctionKind
    eps: float = 0.0
    domain: Optional[Domain] = None
    breaks: Tuple[float, ...] = field(default_factory=tuple)

    def value(self, z) -> np.ndarray:
        return self.value_fn(np.asarray(z, dtype=complex))

    def gradient(self, z) -> np.ndarray:
        return self.gradient_fn(np.asarray(z, dtype=complex))

    def laplacian(self, z) -> np.ndarray:
        return self.laplacian_fn(np.asarray(z, dtype=complex))


def gaussian_bump(center: complex = 0j, width: float = 0.15, amplitude: float = 1.0) -> TestFunction:
    """Analytic smooth f(z) = A exp(-|z - c|^2 / (2 s^2))."""
    c = complex(center)
    s2 = width * width

    def value(z):
        return amplitude * np.exp(-np.abs(z - c) ** 2 / (2 * s2))

    def gradient(z):
        return -(z - c) / s2 * value(z)

    def laplacian(z):
        return (np.abs(z - c) ** 2 / (s2 * s2) - 2.0 / s2) * value(z)

    reach = 8.0 * width
    return TestFunction(
        value_fn=value,
        gradient_fn=gradient,
        laplacian_fn=laplacian,
        center=c,
        radius=reach,
        a=0.0,
        tag=TestFunctionKind.GAUSSIAN_BUMP,
        breaks=tuple(r for r in (abs(c) - reach, abs(c), abs(c) + reach) if 0.0 < r < 1.0),
    )


def _radial_nodes(r: np.ndarray, R: float, eps: float, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Quadrature in rho on [0, 1] split at the kink rho_k = |r - R| / eps of the
    angular measure; the far piece uses rho = rho_k + (1 - rho_k) x^2.
    """
    x, wx = _gauss_legendre(n)
    rho_k = np.clip(np.abs(r - R) / eps, 0.0, 1.0)[:, None]
    rho = np.concatenate([rho_k * x, rho_k + (1.0 - rho_k) * x * x], axis=1)
    wts = np.concatenate([rho_k * wx, 2.0 * (1.0 - rho_k) * x * wx], axis=1)
    return rho, wts


def _arc_cosine(r: np.ndarray, s: np.ndarray, R: float) -> np.ndarray:
    """cos of the half-angle of the circle |y| = s about a point at distance r that lies inside the disk R."""
    num = r * r + s * s - R * R
    den = 2.0 * r * s
    fallback = np.where(np.maximum(r, s) < R, -1.0, 1.0)
    t = np.where(den > 0, num / np.where(den > 0, den, 1.0), fallback)
    return np.clip(t, -1.0, 1.0)


def _disk_profile(r: np.ndarray, R: float, eps: float, n: int = RADIAL_NODES) -> Dict[str, np.ndarray]:
    """f, d f/dr and Delta f of the mollified disk indicator as functions of the radius."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    rho, wts = _radial_nodes(r, R, eps, n)
    t = _arc_cosine(r[:, None], eps * rho, R)
    A = 2.0 * np.arccos(t)
    base = wts * bump(rho) * rho
    norm = 2.0 * np.pi * base.sum(axis=1)
    value = (base * A).sum(axis=1) / norm
    drdf = (wts * bump_d1(rho) * rho * 2.0 * np.sqrt(1.0 - t * t)).sum(axis=1) / (norm * eps)
    lap = (wts * bump_laplacian(rho) * rho * A).sum(axis=1) / (norm * eps * eps)
    return {"value": value, "dr": drdf, "laplacian": lap}


def _polar_offsets(n_rho: int = POLAR_RHO_NODES, n_theta: int = POLAR_THETA_NODES):
    x, wx = _gauss_legendre(n_rho)
    theta = (np.arange(n_theta) + 0.5) * 2 * np.pi / n_theta
    rho = x[:, None] * np.ones_like(theta)[None, :]
    dirs = np.exp(1j * theta)[None, :] * np.ones_like(x)[:, None]
    w = (wx * x)[:, None] * np.full_like(theta, 2 * np.pi / n_theta)[None, :]
    return rho.ravel(), dirs.ravel(), w.ravel()


def _tube_masks(domain: Domain, z: np.ndarray, eps: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    sd = domain.sdf(z)
    return sd <= -eps, sd >= eps, np.abs(sd) < eps


def _general_evaluators(domain: Domain, eps: float) -> Tuple[ArrayFn, ArrayFn, ArrayFn]:
    rho, dirs, w = _polar_offsets()
    g, g1, lg = bump(rho) * w, bump_d1(rho) * w, bump_laplacian(rho) * w
    norm = g.sum()

    def convolve(z: np.ndarray, kernel: np.ndarray) -> np.ndarray:
        pts = z.ravel()[:, None] - eps * rho[None, :] * dirs[None, :]
        mask = domain.sdf(pts) < 0.0
        return mask @ kernel

    def value(z):
        z = np.asarray(z, dtype=complex)
        inside, outside, tube = _tube_masks(domain, z, eps)
        out = np.where(inside, 1.0, 0.0).astype(float)
        if tube.any():
            out[tube] = convolve(z[tube], g) / norm
        return out

    def gradient(z):
        z = np.asarray(z, dtype=complex)
        _, _, tube = _tube_masks(domain, z, eps)
        out = np.zeros(z.shape, dtype=complex)
        if tube.any():
            out[tube] = convolve(z[tube], g1 * dirs) / (norm * eps)
        return out

    def laplacian(z):
        z = np.asarray(z, dtype=complex)
        _, _, tube = _tube_masks(domain, z, eps)
        out = np.zeros(z.shape, dtype=float)
        if tube.any():
            out[tube] = convolve(z[tube], lg) / (norm * eps * eps)
        return out

    return value, gradient, laplacian


def _disk_evaluators(domain: Domain, eps: float) -> Tuple[ArrayFn, ArrayFn, ArrayFn]:
    c, R = domain.center, domain.effective_radius

    def profile(z, key):
        z = np.asarray(z, dtype=complex)
        r = np.abs(z - c)
        inside, outside, tube = r <= R - eps, r >= R + eps, np.abs(r - R) < eps
        return z, r, inside, tube, (_disk_profile(r[tube], R, eps)[key] if tube.any() else None)

    def value(z):
        z, r, inside, tube, vals = profile(z, "value")
        out = np.where(inside, 1.0, 0.0).astype(float)
        if vals is not None:
            out[tube] = vals
        return out

    def gradient(z):
        z, r, inside, tube, vals = profile(z, "dr")
        out = np.zeros(z.shape, dtype=complex)
        if vals is not None:
            d = z[tube] - c
            unit = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1.0), 0.0)
            out[tube] = vals * unit
        return out

    def laplacian(z):
        z, r, inside, tube, vals = profile(z, "laplacian")
        out = np.zeros(z.shape, dtype=float)
        if vals is not None:
            out[tube] = vals
        return out

    return value, gradient, laplacian


def mollify(domain: Domain, a: float, N: int, grid_points: int = MIN_POINTS_PER_EPS) -> TestFunction:
    """f = 1_Omega * omega_{a,N} with mollification length eps = N^-a."""
    if grid_points < MIN_POINTS_PER_EPS:
        raise ConfigError(f"resolution of {grid_points} points per mollification length is below {MIN_POINTS_PER_EPS}")
    if a < 0:
        raise ConfigError("a must be >= 0")
    eps = float(N) ** (-a)
    if domain.is_disk and domain.effective_radius <= 0:
        raise DomainError("disk radius is not positive after the offset")
    fns = _disk_evaluators(domain, eps) if domain.is_disk else _general_evaluators(domain, eps)
    c = domain.center
    reach = domain.bounding_radius + eps
    breaks = [abs(c) - reach, abs(c) + reach]
    if domain.is_disk:
        R = domain.effective_radius
        breaks += [abs(c) + R - eps, abs(c) + R + eps] if abs(c) == 0 else []
    return TestFunction(
        value_fn=fns[0],
        gradient_fn=fns[1],
        laplacian_fn=fns[2],
        center=c,
        radius=reach,
        a=float(a),
        tag=TestFunctionKind.MOLLIFIED_INDICATOR,
        eps=eps,
        domain=domain,
        breaks=tuple(sorted(b for b in breaks if 0.0 < b < 1.0)),
    )


def envelopes(domain: Domain, a: float, N: int, grid_points: int = MIN_POINTS_PER_EPS) -> Tuple[TestFunction, TestFunction]:
    """(f_minus, f_plus) mollified over the inward/outward N^-a offsets of Omega."""
    eps = float(N) ** (-a)
    if eps >= domain.inradius:
        raise DomainError(
            f"offset {eps:.4g} is not below the inradius {domain.inradius:.4g}; the inner envelope degenerates"
        )
    inner = domain.offset_by(-eps)
    outer = domain.offset_by(eps)
    return mollify(inner, a, N, grid_points), mollify(outer, a, N, grid_points)


def build_test_function(spec: TestFunctionSpec, domain: Optional[Domain], N: int) -> TestFunction:
    if spec.kind == TestFunctionKind.GAUSSIAN_BUMP:
        return gaussian_bump(spec.center, spec.width)
    if domain is None:
        raise ConfigError("a mollified indicator needs a domain")
    return mollify(domain, spec.a, N, spec.grid_points)


# ---------------------------------------------------------------------
# z-quadrature covering supp Delta f
# ---------------------------------------------------------------------
def z_quadrature(f: TestFunction, refine: int = 1, points_per_eps: int = MIN_POINTS_PER_EPS) -> Tuple[np.ndarray, np.ndarray]:
    """
    Midpoint nodes and weights over the region where Delta f is supported:
    polar rings across the tube for disks and bumps, a masked Cartesian
    grid with spacing <= eps/4 otherwise.
    """
    if f.tag == TestFunctionKind.GAUSSIAN_BUMP:
        n_r, n_t = 80 * refine, 160 * refine
        r = (np.arange(n_r) + 0.5) * f.radius / n_r
        th = (np.arange(n_t) + 0.5) * 2 * np.pi / n_t
        Rg, Tg = np.meshgrid(r, th, indexing="ij")
        nodes = f.center + Rg * np.exp(1j * Tg)
        weights = Rg * (f.radius / n_r) * (2 * np.pi / n_t)
        return nodes.ravel(), weights.ravel()

    dom, eps = f.domain, f.eps
    if dom.is_disk:
        R = dom.effective_radius
        n_r = 2 * points_per_eps * 2 * refine
        lo = max(R - eps, 0.0)
        hi = R + eps
        h_r = (hi - lo) / n_r
        r = lo + (np.arange(n_r) + 0.5) * h_r
        n_t = int(np.ceil(2 * np.pi * hi / h_r))
        th = (np.arange(n_t) + 0.5) * 2 * np.pi / n_t
        Rg, Tg = np.meshgrid(r, th, indexing="ij")
        nodes = dom.center + Rg * np.exp(1j * Tg)
        weights = Rg * h_r * (2 * np.pi / n_t)
        return nodes.ravel(), weights.ravel()

    h = min(eps / 4.0, eps / points_per_eps * 2) / refine
    reach = dom.bounding_radius + eps
    n = int(np.ceil(2 * reach / h))
    ax = -reach + (np.arange(n) + 0.5) * (2 * reach / n)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    nodes = (dom.center + X + 1j * Y).ravel()
    keep = np.abs(dom.sdf(nodes)) < eps
    cell = (2 * reach / n) ** 2
    return nodes[keep], np.full(int(keep.sum()), cell)


# ---------------------------------------------------------------------
# Girko evaluation
# ---------------------------------------------------------------------
@dataclass
class GirkoBreakdown:
    J_T: float
    I_0_L: float
    I_L_0: float
    I_0_c: float
    I_c_T: float
    total: float
    closed_form: float
    nodes: int
    regimes: Tuple[float, float, float, float]

    @property
    def pieces(self) -> Dict[str, float]:
        return {
            "J_T": self.J_T,
            "I_0^eta_L": self.I_0_L,
            "I_eta_L^eta_0": self.I_L_0,
            "I_eta_0^eta_c": self.I_0_c,
            "I_eta_c^T": self.I_c_T,
        }


def _node_pieces(lam: np.ndarray, eta_L: float, eta_0: float, eta_c: float, T: float) -> np.ndarray:
    """Per-node sums over singular values; the constant 2N log T is removed from J_T and I_c^T."""
    if np.any(lam == 0.0):
        raise SingularIntegralError("a singular value vanishes; the eta integral from 0 diverges")
    l2 = lam * lam
    i_0_l = -np.sum(np.log1p(eta_L * eta_L / l2))
    j_t = np.sum(np.log1p(l2 / (T * T)))
    i_l_0 = -np.sum(np.log((l2 + eta_0 ** 2) / (l2 + eta_L ** 2)))
    i_0_c = -np.sum(np.log((l2 + eta_c ** 2) / (l2 + eta_0 ** 2)))
    i_c_t = -j_t + np.sum(np.log(l2 + eta_c ** 2))
    return np.array([j_t, i_0_l, i_l_0, i_0_c, i_c_t, np.sum(np.log(l2))])


def girko_evaluate(
    X: np.ndarray,
    f: TestFunction,
    regimes: Tuple[float, float, float, float],
    refine: int = 1,
    nodes: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> GirkoBreakdown:
    """
    Regime breakdown of sum_i f(sigma_i) through Girko's formula.
    Each piece is (1/4pi) sum_nodes Delta f(z) * [per-node log sum] * weight.
    """
    eta_L, eta_0, eta_c, T = regimes
    if not (0.0 <= eta_L < eta_0 < eta_c < T):
        raise ConfigError("regimes must satisfy eta_L < eta_0 < eta_c < T")
    X = np.asarray(X)
    n = X.shape[0]
    zs, ws = nodes if nodes is not None else z_quadrature(f, refine=refine)
    lap = f.laplacian(zs)
    active = lap != 0.0
    zs, coef = zs[active], (lap * ws)[active] / (4.0 * np.pi)
    eye = np.eye(n)
    acc: List[List[float]] = [[] for _ in range(6)]
    for z, c in zip(zs, coef):
        lam = linalg.svdvals(X - z * eye)
        for k, v in enumerate(_node_pieces(lam, eta_L, eta_0, eta_c, T)):
            acc[k].append(c * v)
    sums = [math.fsum(col) for col in acc]
    total = math.fsum(sums[:5])
    LOG.debug("girko: %d active nodes, total %.6g, closed form %.6g", len(zs), total, sums[5])
    return GirkoBreakdown(
        J_T=sums[0],
        I_0_L=sums[1],
        I_L_0=sums[2],
        I_0_c=sums[3],
        I_c_T=sums[4],
        total=total,
        closed_form=sums[5],
        nodes=int(len(zs)),
        regimes=(eta_L, eta_0, eta_c, T),
    )


def direct_statistic(spectrum: Spectrum, f: TestFunction) -> float:
    """sum_i f(sigma_i)."""
    return float(math.fsum(f.value(spectrum.sigmas)))


def laplacian_l1(f: TestFunction, refine: int = 1) -> float:
    zs, ws = z_quadrature(f, refine=refine)
    return float(np.sum(np.abs(f.laplacian(zs)) * ws))


def integrate_over_plane(f: TestFunction, fn: str = "value", n: int = 400) -> float:
    """Midpoint integral of f (or Delta f) over the disk around f.center of radius f.radius."""
    if f.domain is not None and f.domain.is_disk:
        R, eps, c = f.domain.effective_radius, f.eps, f.center
        x, wx = _gauss_legendre(n)
        lo, hi = max(R - eps, 0.0), R + eps
        r = lo + (hi - lo) * x
        prof = _disk_profile(r, R, eps)
        key = "value" if fn == "value" else "laplacian"
        tube = float(np.sum(prof[key] * r * wx) * (hi - lo) * 2 * np.pi)
        core = math.pi * lo * lo if fn == "value" else 0.0
        return core + tube
    r = (np.arange(n) + 0.5) * f.radius / n
    th = (np.arange(n) + 0.5) * 2 * np.pi / n
    Rg, Tg = np.meshgrid(r, th, indexing="ij")
    zs = f.center + Rg * np.exp(1j * Tg)
    vals = f.value(zs.ravel()) if fn == "value" else f.laplacian(zs.ravel())
    return float(np.sum(vals * (Rg * (f.radius / n) * (2 * np.pi / n)).ravel()))
