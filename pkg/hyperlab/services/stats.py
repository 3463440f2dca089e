"""
Estimators shared by the Monte Carlo experiments: jackknife standard errors,
mean confidence intervals and weighted log-log exponent fits.
"""

from __future__ import annotations

import logging
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import stats as sps

from hyperlab.core.errors import ConfigError, InsufficientSamplesError
from hyperlab.schemas import Estimate, FitResult

LOG = logging.getLogger("hyperlab.stats")

CONFIDENCE = 0.95


def _blocks(n: int, blocks: Optional[int]) -> np.ndarray:
    k = n if blocks is None else max(2, min(int(blocks), n))
    return np.array_split(np.arange(n), k)


def jackknife(
    samples: np.ndarray,
    statistic: Callable[[np.ndarray], float],
    blocks: Optional[int] = None,
) -> Tuple[float, float]:
    """
    (statistic on all samples, delete-a-block jackknife standard error).
    ``samples`` has one observation per leading-axis row.
    """
    samples = np.asarray(samples)
    n = samples.shape[0]
    if n < 2:
        raise InsufficientSamplesError(f"jackknife needs at least 2 samples, got {n}")
    full = statistic(samples)
    groups = _blocks(n, blocks)
    keep = np.ones(n, dtype=bool)
    leave = []
    for g in groups:
        keep[g] = False
        leave.append(statistic(samples[keep]))
        keep[g] = True
    leave = np.asarray(leave)
    k = len(groups)
    se = np.sqrt((k - 1) / k * np.sum(np.abs(leave - leave.mean()) ** 2))
    return full, float(se)


def variance(x: np.ndarray) -> float:
    x = np.asarray(x)
    return float(np.mean(np.abs(x - x.mean()) ** 2))


def bilinear_covariance(xy: np.ndarray) -> complex:
    """E[XY] - E[X]E[Y] for rows (X, Y), without conjugation."""
    xy = np.asarray(xy)
    x, y = xy[:, 0], xy[:, 1]
    return complex(np.mean(x * y) - np.mean(x) * np.mean(y))


def variance_estimate(name: str, x: Sequence[float], blocks: Optional[int] = 50) -> Estimate:
    value, se = jackknife(np.asarray(x, dtype=float), variance, blocks)
    z = sps.norm.ppf(0.5 + CONFIDENCE / 2)
    return Estimate(name=name, value=value, se=se, ci_low=value - z * se, ci_high=value + z * se)


def mean_estimate(name: str, x: Sequence[float]) -> Estimate:
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        raise InsufficientSamplesError(f"{name}: need at least 2 samples, got {n}")
    mean = float(x.mean())
    se = float(x.std(ddof=1) / np.sqrt(n))
    half = float(sps.t.ppf(0.5 + CONFIDENCE / 2, n - 1)) * se
    return Estimate(name=name, value=mean, se=se, ci_low=mean - half, ci_high=mean + half)


def exponent_fit(
    x: Sequence[float],
    y: Sequence[float],
    y_se: Optional[Sequence[float]] = None,
) -> FitResult:
    """
    Weighted least squares of log y on log x. Weights are 1/se(log y)^2
    with se(log y) = se(y)/y. The slope CI uses Student t with n - 2 dof.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size:
        raise ConfigError("exponent fit: x and y differ in length")
    if x.size < 3:
        raise ConfigError(f"exponent fit needs at least 3 points, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ConfigError("exponent fit needs positive abscissae and ordinates")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise ConfigError("exponent fit: all abscissae coincide")

    if y_se is None:
        wts = np.ones_like(ly)
    else:
        rel = np.asarray(y_se, dtype=float) / y
        rel = np.where(rel > 0, rel, np.nan)
        fill = np.nanmedian(rel) if np.any(np.isfinite(rel)) else 1.0
        wts = 1.0 / np.where(np.isfinite(rel), rel, fill) ** 2

    A = np.column_stack([lx, np.ones_like(lx)])
    sw = np.sqrt(wts)
    coef, *_ = np.linalg.lstsq(A * sw[:, None], ly * sw, rcond=None)
    resid = ly - A @ coef
    dof = x.size - 2
    s2 = float(np.sum(wts * resid ** 2) / dof) if dof > 0 else 0.0
    cov = s2 * np.linalg.inv(A.T @ (A * wts[:, None]))
    slope_se = float(np.sqrt(max(cov[0, 0], 0.0)))
    half = float(sps.t.ppf(0.5 + CONFIDENCE / 2, dof)) * slope_se
    return FitResult(
        slope=float(coef[0]),
        intercept=float(coef[1]),
        slope_se=slope_se,
        slope_ci=(float(coef[0]) - half, float(coef[0]) + half),
        covariance=cov.tolist(),
        points=int(x.size),
    )


def z_score(observed: complex, predicted: complex, se: float) -> float:
    if se <= 0:
        return float("inf") if observed != predicted else 0.0
    return float(abs(observed - predicted) / se)
