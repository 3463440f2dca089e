"""
Sampling of i.i.d. matrices and the spectral quantities extracted from them.

Every lambda-dependent quantity comes from the SVD of the N x N matrix X - z;
the 2N x 2N Hermitization is only built by the dense oracles.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from hyperlab.core.errors import ConfigError, NumericalError
from hyperlab.schemas import EnsembleSpec, EntryLaw, SymmetryClass
from hyperlab.services.stability import Observable

LOG = logging.getLogger("hyperlab.spectra")

DEGENERACY_GAP = 1e-12
MAX_DENSE_CHAIN_N = 256
MAX_EIG_N = 2048


# ---------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------
def sample_rng(base_seed: int, index: int, stream: int = 0) -> np.random.Generator:
    """Counter-based stream for sample ``index`` of a run; independent of scheduling."""
    key = [int(base_seed), int(index)] + ([int(stream)] if stream else [])
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def unit_entries(shape, real: bool, rng: np.random.Generator) -> np.ndarray:
    """Standard Gaussian entries of the symmetry class (E|xi|^2 = 1)."""
    return _entries(EntryLaw.GAUSSIAN, real, None, shape, rng)


def _entries(law: EntryLaw, real: bool, mu4: Optional[float], shape, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance i.i.d. entries; complex laws also have E chi^2 = 0."""
    if law == EntryLaw.GAUSSIAN:
        if real:
            return rng.standard_normal(shape)
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    if law == EntryLaw.BERNOULLI:
        if real:
            return rng.choice([-1.0, 1.0], size=shape)
        return (rng.choice([-1.0, 1.0], size=shape) + 1j * rng.choice([-1.0, 1.0], size=shape)) / np.sqrt(2.0)
    if law == EntryLaw.UNIFORM:
        if real:
            return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=shape)
        b = np.sqrt(1.5)
        return rng.uniform(-b, b, size=shape) + 1j * rng.uniform(-b, b, size=shape)
    if law == EntryLaw.CUSTOM:
        a = np.sqrt(float(mu4))
        on = rng.random(shape) < 1.0 / (a * a)
        if real:
            return np.where(on, a * rng.choice([-1.0, 1.0], size=shape), 0.0)
        phase = np.exp(2j * np.pi * rng.random(shape))
        return np.where(on, a * phase, 0.0)
    raise ConfigError(f"unknown entry law {law!r}")


def sample(spec: EnsembleSpec, index: int = 0) -> np.ndarray:
    """
    N x N matrix with i.i.d. entries of the declared law scaled by N^-1/2,
    Gauss-divisible when ``gauss_mixing`` = s > 0: sqrt(1 - s^2) X0 + s X~.
    """
    rng = sample_rng(spec.seed, index)
    real = spec.symmetry_class == SymmetryClass.REAL
    shape = (spec.N, spec.N)
    X = _entries(spec.entry_law, real, spec.mu4, shape, rng)
    s = spec.gauss_mixing
    if s > 0.0:
        X = np.sqrt(1.0 - s * s) * X + s * _entries(EntryLaw.GAUSSIAN, real, None, shape, rng)
    return X / np.sqrt(spec.N)


def sample_points_uniform_disk(N: int, rng: np.random.Generator, radius: float = 1.0) -> np.ndarray:
    """N i.i.d. uniform points in the disk; the non-interacting control for counting statistics."""
    r = radius * np.sqrt(rng.random(N))
    return r * np.exp(2j * np.pi * rng.random(N))


# ---------------------------------------------------------------------
# Hermitization and singular data
# ---------------------------------------------------------------------
@dataclass
class SpectralData:
    """Singular values (ascending) and unit singular vectors of X - z."""

    z: complex
    lambdas: np.ndarray
    left_vectors: Optional[np.ndarray] = None
    right_vectors: Optional[np.ndarray] = None

    @property
    def N(self) -> int:
        return int(self.lambdas.shape[0])


@dataclass
class Spectrum:
    sigmas: np.ndarray


def hermitize(X: np.ndarray, z: complex) -> np.ndarray:
    """H^z = [[0, X - z], [(X - z)^*, 0]]."""
    X = np.asarray(X)
    n = X.shape[0]
    if X.shape != (n, n):
        raise ConfigError(f"expected a square matrix, got {X.shape}")
    Y = X - complex(z) * np.eye(n)
    H = np.zeros((2 * n, 2 * n), dtype=complex)
    H[:n, n:] = Y
    H[n:, :n] = Y.conj().T
    return H


def svd_data(X: np.ndarray, z: complex, vectors: bool = True) -> SpectralData:
    X = np.asarray(X)
    n = X.shape[0]
    Y = X - complex(z) * np.eye(n)
    try:
        if not vectors:
            s = linalg.svdvals(Y)
            return SpectralData(z=complex(z), lambdas=s[::-1].copy())
        U, s, Vh = linalg.svd(Y)
    except linalg.LinAlgError as e:
        raise NumericalError(f"SVD failed at z={z}: {e}")
    return SpectralData(
        z=complex(z),
        lambdas=s[::-1].copy(),
        left_vectors=U[:, ::-1].copy(),
        right_vectors=Vh.conj().T[:, ::-1].copy(),
    )


def hermitized_eigen(X: np.ndarray, z: complex) -> Tuple[np.ndarray, np.ndarray]:
    """Dense 2N x 2N eigendecomposition of H^z; oracle for svd_data."""
    return linalg.eigh(hermitize(X, z))


# ---------------------------------------------------------------------
# Resolvent traces
# ---------------------------------------------------------------------
def resolvent_trace(data: SpectralData, w: Union[complex, np.ndarray]) -> Union[complex, np.ndarray]:
    """<G^z(w)> = (1/N) sum_i w / (lambda_i^2 - w^2); vectorized over w."""
    w_arr = np.asarray(w, dtype=complex)
    lam2 = data.lambdas ** 2
    out = (w_arr[..., None] / (lam2 - w_arr[..., None] ** 2)).mean(axis=-1)
    return complex(out) if np.ndim(w) == 0 else out


def resolvent_power_trace(data: SpectralData, w: complex, power: int) -> complex:
    """<G^power> = (1/2N) sum_i [(lambda_i - w)^-p + (-lambda_i - w)^-p]."""
    w = complex(w)
    lam = data.lambdas
    return complex(0.5 * np.mean((lam - w) ** (-power) + (-lam - w) ** (-power)))


def resolvent_dense(X: np.ndarray, z: complex, w: complex) -> np.ndarray:
    H = hermitize(X, z)
    return linalg.inv(H - complex(w) * np.eye(H.shape[0]))


def _expand(B, N: int) -> np.ndarray:
    if isinstance(B, Observable):
        return B.expand(N)
    B = np.asarray(B, dtype=complex)
    if B.shape == (2, 2):
        return np.kron(B, np.eye(N))
    if B.shape != (2 * N, 2 * N):
        raise ConfigError(f"observable of shape {B.shape} does not fit 2N = {2 * N}")
    return B


def chain_trace(
    X: np.ndarray,
    legs: Sequence[Tuple[complex, complex, bool]],
    observables: Sequence,
) -> complex:
    """
    Normalized trace of G_1 B_1 G_2 ... G_k [B_k] with dense resolvents.

    Each leg is (z, w, transpose); a transposed leg uses G^z(w)^t.
    ``observables`` has k - 1 entries, or k when the product closes with B_k.
    """
    X = np.asarray(X)
    N = X.shape[0]
    if X.shape != (N, N):
        raise ConfigError(f"expected a square matrix, got {X.shape}")
    if N > MAX_DENSE_CHAIN_N:
        raise ConfigError(f"dense chains are limited to N <= {MAX_DENSE_CHAIN_N}")
    k = len(legs)
    if len(observables) not in (k - 1, k):
        raise ConfigError(f"{k} legs take {k - 1} or {k} observables, got {len(observables)}")
    cache = {}
    prod = None
    for idx, (z, w, transpose) in enumerate(legs):
        w = complex(w)
        if w.imag == 0:
            raise ConfigError("chain legs need Im w != 0")
        key = (complex(z), w)
        if key not in cache:
            cache[key] = resolvent_dense(X, z, w)
        G = cache[key].T if transpose else cache[key]
        prod = G if prod is None else prod @ G
        if idx < len(observables):
            prod = prod @ _expand(observables[idx], N)
    return complex(np.trace(prod)) / (2 * N)


# ---------------------------------------------------------------------
# Eigenvalues and overlaps
# ---------------------------------------------------------------------
def complex_spectrum(X: np.ndarray) -> Spectrum:
    X = np.asarray(X)
    if X.shape[0] > MAX_EIG_N:
        raise ConfigError(f"dense eigenvalues are limited to N <= {MAX_EIG_N}")
    try:
        sigmas = linalg.eigvals(X, overwrite_a=False, check_finite=True)
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"eigenvalue iteration did not converge for N={X.shape[0]}: {e}")
    return Spectrum(sigmas=np.asarray(sigmas, dtype=complex))


def eigenpair_residual(X: np.ndarray, count: int = 4, seed: int = 0) -> float:
    """max ||X v - sigma v|| over ``count`` randomly chosen unit eigenvectors."""
    vals, vecs = linalg.eig(X)
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(vals), size=min(count, len(vals)), replace=False)
    res = [np.linalg.norm(X @ vecs[:, k] - vals[k] * vecs[:, k]) / np.linalg.norm(vecs[:, k]) for k in idx]
    return float(max(res))


def _degenerate(lambdas: np.ndarray, i: int) -> bool:
    gaps = []
    if i > 0:
        gaps.append(lambdas[i] - lambdas[i - 1])
    if i + 1 < len(lambdas):
        gaps.append(lambdas[i + 1] - lambdas[i])
    return bool(gaps) and min(gaps) < DEGENERACY_GAP


def overlaps(
    data1: SpectralData,
    data2: SpectralData,
    index_pairs: Sequence[Tuple[int, int]],
    bulk_fraction: float = 0.9,
) -> np.ndarray:
    """
    |<u_i^{z1}, u_j^{z2}>|^2 + |<v_i^{z1}, v_j^{z2}>|^2 with half-unit vectors
    (||u|| = ||v|| = 1/2). Indices are 1-based in ascending singular order.
    Degenerate singular values give NaN for that pair.
    """
    if data1.left_vectors is None or data2.left_vectors is None:
        raise ConfigError("overlaps need SpectralData computed with vectors")
    N = data1.N
    limit = int(np.floor(bulk_fraction * N))
    out: List[float] = []
    for i, j in index_pairs:
        if not (1 <= i <= limit and 1 <= j <= limit):
            raise ConfigError(f"index pair ({i}, {j}) outside the bulk range 1..{limit}")
        a, b = i - 1, j - 1
        if _degenerate(data1.lambdas, a) or _degenerate(data2.lambdas, b):
            LOG.warning("degenerate singular value at pair (%d, %d); vector choice ambiguous", i, j)
            out.append(float("nan"))
            continue
        uu = np.vdot(data1.left_vectors[:, a], data2.left_vectors[:, b])
        vv = np.vdot(data1.right_vectors[:, a], data2.right_vectors[:, b])
        out.append(float((abs(uu) ** 2 + abs(vv) ** 2) / 16.0))
    return np.array(out)
