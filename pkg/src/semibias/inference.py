"""Variance estimation, confidence intervals and t-statistics.

All variances are estimates of the asymptotic variance of
``sqrt(n) * (theta_hat - theta_0)``; divide by ``n`` for the variance of the
estimate itself.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .estimators import dwad_pair_matrix
from .kernels import KernelSpec
from .smoothing import Dataset, kde, loo_kde

__all__ = [
    "VarianceMethod",
    "VarianceEstimate",
    "BootstrapError",
    "rng_stream",
    "variance_ad",
    "variance_isd",
    "variance_dwad",
    "bootstrap_variance",
    "confidence_interval",
    "t_statistic",
]

_STD_NORMAL = NormalDist()

SeedLike = Union[int, Sequence[int], np.random.SeedSequence]


class VarianceMethod(str, enum.Enum):
    PLUGIN_AD = "plugin_ad"
    PLUGIN_ISD = "plugin_isd"
    USTAT_DWAD = "ustat_dwad"
    BOOTSTRAP = "bootstrap"


@dataclass(frozen=True)
class VarianceEstimate:
    sigma_hat: float
    method: VarianceMethod
    n_boot: Optional[int] = None

    def __post_init__(self):
        if not self.sigma_hat >= 0:
            raise ValueError(f"variance estimate must be non-negative, got {self.sigma_hat}")

    def __float__(self):
        return self.sigma_hat


class BootstrapError(RuntimeError):
    pass


def rng_stream(seed: SeedLike, *path: int) -> np.random.Generator:
    """Independent Philox stream addressed by ``(seed, *path)``.

    The path goes into the seed sequence's spawn key, so different paths never
    share a stream however the work is scheduled.
    """
    if isinstance(seed, np.random.SeedSequence):
        ss = np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + path)
    else:
        ss = np.random.SeedSequence(seed, spawn_key=path)
    return np.random.Generator(np.random.Philox(ss))


def variance_ad(data: Dataset, kernel: KernelSpec, h: float) -> VarianceEstimate:
    """4 times the sample variance of the leave-one-out densities at the z_i."""
    vals = loo_kde(data, kernel, h)
    return VarianceEstimate(float(4.0 * np.var(vals, ddof=1)), VarianceMethod.PLUGIN_AD)


def variance_isd(data: Dataset, kernel: KernelSpec, h: float) -> VarianceEstimate:
    """4 times the sample variance of the full-sample densities at the z_i."""
    if data.d != 1:
        raise NotImplementedError("the ISD estimator is univariate only")
    vals = kde(data, kernel, h, data.points)
    return VarianceEstimate(float(4.0 * np.var(vals, ddof=1)), VarianceMethod.PLUGIN_ISD)


def dwad_variance_terms(data: Dataset, kernel: KernelSpec, h: float, component: int = 0):
    """Return (projection term, degenerate term) of the DWAD U-statistic variance.

    With pair kernel U_ij and L_i = mean_{j != i} U_ij, the projection term is
    4 * var(L_i) and the degenerate term is the mean over i != j of
    (U_ij - L_i - L_j + theta_hat)^2.
    """
    n = data.n
    u = dwad_pair_matrix(data, kernel, h, component)
    loo_means = u.sum(axis=1) / (n - 1)
    theta = loo_means.mean()
    resid = u - loo_means[:, None] - loo_means[None, :] + theta
    np.fill_diagonal(resid, 0.0)
    degenerate = float((resid**2).sum() / (n * (n - 1)))
    return float(4.0 * np.var(loo_means, ddof=1)), degenerate


def variance_dwad(
    data: Dataset,
    kernel: KernelSpec,
    h: float,
    component: int = 0,
    degenerate_correction: bool = True,
) -> VarianceEstimate:
    """Hoeffding-decomposition variance of the DWAD estimator.

    The sample variance of the leave-one-out means L_i double counts the
    degenerate part of the U-statistic, which dominates when the bandwidth is
    small: E[4 var(L_i)] ~ 4 var(l) + 4 V_g / (n-1) while
    n var(theta_hat) ~ 4 var(l) + 2 V_g / (n-1).  The corrected estimate
    subtracts 2 V_g_hat / (n-1).  Should sampling noise push it to zero or
    below, the projection-only estimate is returned instead.
    """
    if data.responses is None:
        raise ValueError("the DWAD estimator needs responses")
    if data.n < 3:
        raise ValueError(f"DWAD variance needs n >= 3, got n={data.n}")
    projection, degenerate = dwad_variance_terms(data, kernel, h, component)
    sigma = projection
    if degenerate_correction:
        corrected = projection - 2.0 * degenerate / (data.n - 1)
        if corrected > 0:
            sigma = corrected
    return VarianceEstimate(sigma, VarianceMethod.USTAT_DWAD)


def bootstrap_variance(
    statistic: Callable[[Dataset], float],
    data: Dataset,
    n_boot: int,
    seed: SeedLike = 0,
    n_jobs: int = 1,
) -> VarianceEstimate:
    """n times the sample variance of ``statistic`` over ``n_boot`` resamples.

    Resample p draws its row indices from ``rng_stream(seed, p)``.  A resample
    on which ``statistic`` raises or returns a non-finite value is redrawn
    once from ``rng_stream(seed, p, 1)``; a second failure raises
    :class:`BootstrapError`.  The result does not depend on ``n_jobs``.
    """
    if n_boot < 2:
        raise ValueError(f"bootstrap needs at least 2 resamples, got {n_boot}")
    n = data.n

    def one(p: int) -> float:
        last = None
        for path in ((p,), (p, 1)):
            idx = rng_stream(seed, *path).integers(0, n, size=n)
            try:
                value = float(statistic(data.take(idx)))
            except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
                last = exc
                continue
            if np.isfinite(value):
                return value
            last = ValueError(f"non-finite statistic {value}")
        raise BootstrapError(f"bootstrap resample {p} failed twice: {last}") from last

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            values = list(pool.map(one, range(n_boot)))
    else:
        values = [one(p) for p in range(n_boot)]
    sigma = float(n * np.var(values, ddof=1))
    return VarianceEstimate(sigma, VarianceMethod.BOOTSTRAP, n_boot)


def confidence_interval(theta: float, sigma: float, n: int, level: float = 0.95):
    """theta +- z_{(1+level)/2} * sqrt(sigma / n)."""
    if not 0 < level < 1:
        raise ValueError(f"confidence level must lie in (0, 1), got {level}")
    if sigma < 0:
        raise ValueError(f"variance must be non-negative, got {sigma}")
    if n < 1:
        raise ValueError(f"sample size must be positive, got {n}")
    half = _STD_NORMAL.inv_cdf(0.5 + level / 2.0) * np.sqrt(sigma / n)
    return float(theta - half), float(theta + half)


def t_statistic(theta: float, theta0: float, sigma: float, n: int) -> float:
    if not sigma > 0:
        raise ValueError(f"t-statistic needs a positive variance, got {sigma}")
    return float(np.sqrt(n) * (theta - theta0) / np.sqrt(sigma))
