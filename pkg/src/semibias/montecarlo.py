"""Simulation designs, true parameters and the replication engine.

Replication ``r`` draws its data from ``rng_stream(master_seed, r)`` and its
bootstrap resample ``p`` from ``rng_stream(master_seed, r, p)``; results are
gathered in replication order, so a report is identical for any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate

from .api import Method, estimate
from .estimators import EstimatorKind, Kind
from .inference import rng_stream
from .kernels import gaussian
from .smoothing import DEFAULT_GRID_MARGIN, DEFAULT_GRID_POINTS, Dataset

__all__ = [
    "MixedNormalParams",
    "LinearModelParams",
    "ExperimentConfig",
    "ReportRow",
    "MonteCarloReport",
    "ExperimentError",
    "sample_mixed_normal",
    "mixed_normal_density",
    "theta_ad_closed_form",
    "true_theta_ad",
    "sample_linear_model",
    "true_theta_dwad",
    "true_theta",
    "mse_decomposition",
    "coverage_rate",
    "default_bandwidths",
    "run_experiment",
]

REPORTED_THETA_AD = 0.0796


@dataclass(frozen=True)
class MixedNormalParams:
    alpha: float = 0.4
    mu1: float = -2.0
    sigma1_sq: float = 0.5
    mu2: float = 1.0
    sigma2_sq: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.sigma1_sq <= 0 or self.sigma2_sq <= 0:
            raise ValueError("component variances must be positive")


@dataclass(frozen=True)
class LinearModelParams:
    d: int = 3
    beta: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be positive, got {self.d}")
        beta = (1.0,) * self.d if self.beta is None else tuple(float(b) for b in self.beta)
        if len(beta) != self.d:
            raise ValueError(f"beta has length {len(beta)}, expected d={self.d}")
        object.__setattr__(self, "beta", beta)


def sample_mixed_normal(params: MixedNormalParams, n: int, rng: np.random.Generator) -> Dataset:
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    first = rng.random(n) < params.alpha
    z = rng.standard_normal(n)
    mu = np.where(first, params.mu1, params.mu2)
    sd = np.where(first, np.sqrt(params.sigma1_sq), np.sqrt(params.sigma2_sq))
    return Dataset((mu + sd * z)[:, None])


def mixed_normal_density(params: MixedNormalParams, x):
    x = np.asarray(x, dtype=float)

    def phi(mu, var):
        return np.exp(-0.5 * (x - mu) ** 2 / var) / np.sqrt(2 * np.pi * var)

    a = params.alpha
    return a * phi(params.mu1, params.sigma1_sq) + (1 - a) * phi(params.mu2, params.sigma2_sq)


def theta_ad_closed_form(params: MixedNormalParams) -> float:
    """Closed form of the integrated squared mixture density."""
    a, s1, s2 = params.alpha, params.sigma1_sq, params.sigma2_sq
    cross = np.exp(-0.5 * (params.mu1 - params.mu2) ** 2 / (s1 + s2))
    return float(
        a**2 / np.sqrt(4 * s1 * np.pi)
        + (1 - a) ** 2 / np.sqrt(4 * s2 * np.pi)
        + 2 * a * (1 - a) / np.sqrt(2 * np.pi * (s1 + s2)) * cross
    )


def true_theta_ad(params: MixedNormalParams) -> float:
    """E[f(X)] = int f^2 by adaptive quadrature over +-10 sd of each component.

    Shared by AD and ISD, which target the same parameter.
    """
    sd = np.sqrt(max(params.sigma1_sq, params.sigma2_sq))
    lo = min(params.mu1, params.mu2) - 10 * sd
    hi = max(params.mu1, params.mu2) + 10 * sd
    points = sorted({params.mu1, params.mu2})
    value, _ = integrate.quad(
        lambda t: mixed_normal_density(params, t) ** 2,
        lo,
        hi,
        points=points,
        limit=200,
        epsabs=1e-13,
        epsrel=1e-12,
    )
    return float(value)


def sample_linear_model(
    d: int, beta: Sequence[float], n: int, rng: np.random.Generator
) -> Dataset:
    """y = x'beta + e with x ~ N(0, I_d) and e ~ N(0, 1)."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (d,):
        raise ValueError(f"beta must have length {d}")
    x = rng.standard_normal((n, d))
    y = x @ beta + rng.standard_normal(n)
    return Dataset(x, y)


def true_theta_dwad(d: int, beta: Sequence[float], component: int = 0) -> float:
    """beta_c E[f(X)] = beta_c (4 pi)^{-d/2} for standard normal regressors."""
    return float(beta[component] * (4 * np.pi) ** (-d / 2))


def mse_decomposition(estimates: Sequence[float], theta0: float) -> Tuple[float, float, float]:
    """(bias, variance, mse) with the divisor-R variance so mse = bias^2 + variance."""
    est = np.asarray(estimates, dtype=float)
    if est.size == 0:
        raise ValueError("no estimates to decompose")
    mean = est.mean()
    bias = float(mean - theta0)
    variance = float(np.mean((est - mean) ** 2))
    return bias, variance, bias * bias + variance


def coverage_rate(intervals: Sequence[Tuple[float, float]], theta0: float) -> float:
    iv = np.asarray(intervals, dtype=float).reshape(-1, 2)
    if iv.shape[0] == 0:
        raise ValueError("no intervals")
    return float(np.mean((iv[:, 0] <= theta0) & (theta0 <= iv[:, 1])))


def default_bandwidths(kind: Kind) -> Tuple[float, ...]:
    if Kind(kind) is Kind.DWAD:
        return tuple(float(h) for h in np.linspace(0.2, 1.2, 20))
    return tuple(float(h) for h in np.geomspace(0.05, 0.5, 20))


Dgp = Union[MixedNormalParams, LinearModelParams]


@dataclass(frozen=True)
class ExperimentConfig:
    estimator: EstimatorKind
    dgp: Dgp
    n: int
    replications: int
    bandwidths: Tuple[float, ...]
    methods: Tuple[Method, ...]
    ci_level: float = 0.95
    bootstrap_p: Optional[int] = None
    master_seed: int = 0
    grid_points: int = DEFAULT_GRID_POINTS
    grid_margin: float = DEFAULT_GRID_MARGIN

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.n < 3:
            raise ValueError(f"n must be at least 3, got {self.n}")
        h = np.asarray(self.bandwidths, dtype=float)
        if h.size == 0 or np.any(h <= 0) or np.any(np.diff(h) <= 0):
            raise ValueError("bandwidths must be positive and strictly increasing")
        if not self.methods:
            raise ValueError("at least one method is required")
        if not 0 < self.ci_level < 1:
            raise ValueError(f"ci_level must lie in (0, 1), got {self.ci_level}")
        if self.bootstrap_p is not None and self.bootstrap_p < 2:
            raise ValueError("bootstrap_p must be at least 2")
        kind = self.estimator.kind
        if kind is Kind.DWAD and not isinstance(self.dgp, LinearModelParams):
            raise ValueError("DWAD experiments need the linear-model design")
        if kind is not Kind.DWAD and not isinstance(self.dgp, MixedNormalParams):
            raise ValueError(f"{kind.value} experiments need the mixed-normal design")
        if kind is Kind.DWAD and self.estimator.component >= self.dgp.d:
            raise ValueError("DWAD component out of range for the design dimension")


def true_theta(config: ExperimentConfig) -> float:
    if config.estimator.kind is Kind.DWAD:
        return true_theta_dwad(config.dgp.d, config.dgp.beta, config.estimator.component)
    return true_theta_ad(config.dgp)


def draw(config: ExperimentConfig, replication: int) -> Dataset:
    rng = rng_stream(config.master_seed, replication)
    if isinstance(config.dgp, LinearModelParams):
        return sample_linear_model(config.dgp.d, config.dgp.beta, config.n, rng)
    return sample_mixed_normal(config.dgp, config.n, rng)


class ExperimentError(RuntimeError):
    def __init__(self, replication: int, method: str, h: float, cause: Exception):
        super().__init__(
            f"estimation failed at replication={replication}, method={method}, h={h:g}: {cause}"
        )
        self.replication = replication
        self.method = method
        self.h = h


# theta, b_nl, b_anb, variance, ci lower, ci upper
_FIELDS = 6


def _replicate(config: ExperimentConfig, r: int) -> np.ndarray:
    data = draw(config, r)
    kernel = gaussian(data.d)
    out = np.empty((len(config.methods), len(config.bandwidths), _FIELDS))
    for a, method in enumerate(config.methods):
        for b, h in enumerate(config.bandwidths):
            try:
                rec = estimate(
                    config.estimator,
                    data,
                    h,
                    method,
                    kernel,
                    ci_level=config.ci_level,
                    n_boot=config.bootstrap_p,
                    seed=np.random.SeedSequence(config.master_seed, spawn_key=(r,)),
                    grid_margin=config.grid_margin,
                    grid_points=config.grid_points,
                )
            except Exception as exc:  # noqa: BLE001 - re-raised with the failing cell
                raise ExperimentError(r, method.name, h, exc) from exc
            out[a, b] = (
                rec.theta_hat,
                rec.b_nl_hat,
                rec.b_anb_hat,
                rec.variance_hat,
                rec.ci[0],
                rec.ci[1],
            )
    return out


_WORKER_CONFIG: Optional[ExperimentConfig] = None


def _init_worker(config: ExperimentConfig):
    global _WORKER_CONFIG
    _WORKER_CONFIG = config
    os.environ.setdefault("OMP_NUM_THREADS", "1")


def _replicate_chunk(indices: Sequence[int]) -> List[np.ndarray]:
    return [_replicate(_WORKER_CONFIG, r) for r in indices]


@dataclass
class ReportRow:
    method: str
    eta: str
    h: float
    bias: float
    variance: float
    mse: float
    coverage: float
    mean_b_nl: float = 0.0
    mean_b_anb: float = 0.0
    mean_variance_hat: float = 0.0
    t_stats: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    estimates: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)


@dataclass
class MonteCarloReport:
    config: ExperimentConfig
    theta0: float
    rows: List[ReportRow]

    def row(self, method: str, h: float) -> ReportRow:
        for row in self.rows:
            if row.method == method and np.isclose(row.h, h, rtol=0, atol=1e-12):
                return row
        raise KeyError((method, h))

    def by_method(self, method: str) -> List[ReportRow]:
        return sorted((r for r in self.rows if r.method == method), key=lambda r: r.h)


def resolve_threads(threads: Optional[int]) -> int:
    if threads is None:
        env = os.environ.get("SEMIBIAS_THREADS")
        threads = int(env) if env else 1
    return max(1, int(threads))


def run_experiment(config: ExperimentConfig, threads: Optional[int] = None) -> MonteCarloReport:
    """Run every replication and aggregate one row per (method, bandwidth).

    ``threads`` caps the worker pool (default: ``$SEMIBIAS_THREADS`` or 1).
    Rows are sorted by (method, h).
    """
    threads = resolve_threads(threads)
    reps = range(config.replications)
    if threads == 1 or config.replications == 1:
        results = [_replicate(config, r) for r in reps]
    else:
        chunk = max(1, config.replications // (threads * 8))
        chunks = [list(reps[i : i + chunk]) for i in range(0, config.replications, chunk)]
        with ProcessPoolExecutor(
            max_workers=threads, initializer=_init_worker, initargs=(config,)
        ) as pool:
            results = [res for part in pool.map(_replicate_chunk, chunks) for res in part]
    cube = np.stack(results)  # (R, methods, bandwidths, fields)
    theta0 = true_theta(config)
    rows = []
    for a, method in enumerate(config.methods):
        for b, h in enumerate(config.bandwidths):
            cell = cube[:, a, b, :]
            bias, variance, mse = mse_decomposition(cell[:, 0], theta0)
            sigma = cell[:, 3]
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.where(
                    sigma > 0,
                    np.sqrt(config.n) * (cell[:, 0] - theta0) / np.sqrt(sigma),
                    np.nan,
                )
            rows.append(
                ReportRow(
                    method=method.name,
                    eta=method.eta_label,
                    h=float(h),
                    bias=bias,
                    variance=variance,
                    mse=mse,
                    coverage=coverage_rate(cell[:, 4:6], theta0),
                    mean_b_nl=float(cell[:, 1].mean()),
                    mean_b_anb=float(cell[:, 2].mean()),
                    mean_variance_hat=float(sigma.mean()),
                    t_stats=t,
                    estimates=cell[:, 0].copy(),
                )
            )
    rows.sort(key=lambda r: (r.method, r.h))
    return MonteCarloReport(config, theta0, rows)

