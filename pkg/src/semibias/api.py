"""One-call estimation and scikit-learn style estimators.

:func:`estimate` runs a raw, analytically corrected (``"abc"``) or
multi-scale jackknife estimator on a dataset, estimates its variance and
builds the confidence interval.  The estimator classes wrap it behind the
usual ``fit`` / ``get_params`` protocol so they compose with scikit-learn
tooling (``clone``, parameter grids, pipelines of preprocessing steps).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .bias_correction import (
    JackknifeScheme,
    Scales,
    abc_ad,
    abc_dwad,
    abc_isd,
    make_scheme,
    msj_estimate,
    raw_estimate,
)
from .estimators import EstimateRecord, EstimatorKind, Kind
from .inference import (
    SeedLike,
    VarianceEstimate,
    bootstrap_variance,
    confidence_interval,
    variance_ad,
    variance_dwad,
    variance_isd,
)
from .kernels import KernelSpec, gaussian, twicing
from .smoothing import DEFAULT_GRID_MARGIN, DEFAULT_GRID_POINTS, Dataset, GridSpec

__all__ = [
    "Method",
    "resolve_method",
    "point_estimate",
    "plugin_variance",
    "estimate",
    "AverageDensity",
    "IntegratedSquaredDensity",
    "DensityWeightedAverageDerivative",
]

_SCALES_BY_SIZE = {
    1: None,
    2: Scales.TWO_SCALE_SMOOTHING,
    3: Scales.THREE_SCALE,
    5: Scales.FIVE_SCALE_EVEN,
}

PRESETS = {
    "2sj": Scales.TWO_SCALE_SMOOTHING,
    "3sj": Scales.THREE_SCALE,
    "5sj": Scales.FIVE_SCALE_EVEN,
}


@dataclass(frozen=True)
class Method:
    """A correction method: ``raw``, ``abc`` or a named jackknife scheme."""

    name: str
    scheme: Optional[JackknifeScheme] = None

    @property
    def is_msj(self) -> bool:
        return self.scheme is not None

    @property
    def eta_label(self) -> str:
        if self.scheme is None:
            return ""
        return ";".join(f"{e:g}" for e in self.scheme.etas)


def resolve_method(
    name: str,
    kind: EstimatorKind,
    kernel: KernelSpec,
    etas: Optional[Sequence[float]] = None,
    scales: Optional[Scales] = None,
) -> Method:
    """Build a :class:`Method` from its name.

    ``"raw"`` and ``"abc"`` take no options.  ``"2sj"``, ``"3sj"`` and
    ``"5sj"`` are the preset schemes (default etas unless overridden).
    ``"msj"`` uses ``scales`` when given, otherwise infers them from the
    number of etas (1, 2, 3 or 5); without etas it falls back to 5SJ for ISD
    and 2SJ for AD and DWAD.
    """
    name = name.lower()
    if name in ("raw", "abc"):
        return Method(name)
    if name in PRESETS:
        scales = PRESETS[name] if scales is None else Scales(scales)
    elif name == "msj":
        if scales is None:
            if etas is None:
                scales = (
                    Scales.FIVE_SCALE_EVEN if kind.kind is Kind.ISD else Scales.TWO_SCALE_SMOOTHING
                )
            else:
                if len(etas) not in _SCALES_BY_SIZE:
                    raise ValueError(
                        f"cannot infer a scheme for {len(etas)} etas; pass scales explicitly"
                    )
                scales = _SCALES_BY_SIZE[len(etas)]
    else:
        raise ValueError(f"unknown method {name!r}")
    if scales is None:
        scheme = JackknifeScheme.solve(tuple(etas), (), name)
    else:
        scheme = make_scheme(kind, kernel, scales, etas, name)
    return Method(name, scheme)


def point_estimate(
    kind: EstimatorKind,
    data: Dataset,
    kernel: KernelSpec,
    h: float,
    method: Method,
    grid: Optional[GridSpec] = None,
):
    """Return ``(theta_hat, b_nl_hat, b_anb_hat)`` for one method."""
    if kind.kind is Kind.ISD and grid is None:
        grid = GridSpec.around(data)
    if method.is_msj:
        return msj_estimate(kind, data, kernel, h, method.scheme, grid), 0.0, 0.0
    if method.name == "raw":
        return raw_estimate(kind, data, kernel, h, grid), 0.0, 0.0
    if kind.kind is Kind.AD:
        b_anb, corrected = abc_ad(data, kernel, h)
        return corrected, 0.0, b_anb
    if kind.kind is Kind.ISD:
        b_nl, b_anb, corrected = abc_isd(data, kernel, h, grid)
        return corrected, b_nl, b_anb
    b_nl, corrected = abc_dwad(data, kernel, h, kind.component)
    return corrected, b_nl, 0.0


def _equivalent_kernel(kernel: KernelSpec, method: Method) -> KernelSpec:
    if method.is_msj:
        return method.scheme.equivalent_kernel(kernel)
    if method.name == "abc":
        return twicing(kernel)
    return kernel


def plugin_variance(
    kind: EstimatorKind, data: Dataset, kernel: KernelSpec, h: float, method: Method
) -> VarianceEstimate:
    """Plug-in variance with the kernel equivalent to the chosen correction.

    ABC estimators are evaluated with the twicing kernel and jackknife
    estimators with the combined multi-bandwidth kernel, so the per-observation
    terms carry the correction.
    """
    k = _equivalent_kernel(kernel, method)
    if kind.kind is Kind.AD:
        return variance_ad(data, k, h)
    if kind.kind is Kind.ISD:
        return variance_isd(data, k, h)
    return variance_dwad(data, k, h, kind.component)


def estimate(
    kind: EstimatorKind,
    data: Dataset,
    h: float,
    method: Method,
    kernel: Optional[KernelSpec] = None,
    ci_level: Optional[float] = 0.95,
    n_boot: Optional[int] = None,
    seed: SeedLike = 0,
    grid_margin: float = DEFAULT_GRID_MARGIN,
    grid_points: int = DEFAULT_GRID_POINTS,
) -> EstimateRecord:
    """Estimate, correct, and attach a variance and confidence interval.

    With ``n_boot`` set, the variance is bootstrapped (the correction is
    recomputed on every resample); otherwise the plug-in variance is used.
    ``ci_level=None`` skips variance and interval entirely.
    """
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    if kernel is None:
        kernel = gaussian(data.d)
    kind.validate(data)
    if data.n < 2:
        raise ValueError(f"estimation needs n >= 2, got n={data.n}")

    def grid_for(sample: Dataset) -> Optional[GridSpec]:
        if kind.kind is not Kind.ISD:
            return None
        return GridSpec.around(sample, grid_margin, grid_points)

    theta, b_nl, b_anb = point_estimate(kind, data, kernel, h, method, grid_for(data))
    record = EstimateRecord(
        theta_hat=theta,
        bandwidth=h,
        kind=kind,
        correction=method.name,
        etas=method.scheme.etas if method.is_msj else (),
        b_nl_hat=b_nl,
        b_anb_hat=b_anb,
        n=data.n,
    )
    if ci_level is None:
        return record
    if n_boot:

        def statistic(sample: Dataset) -> float:
            return point_estimate(kind, sample, kernel, h, method, grid_for(sample))[0]

        var = bootstrap_variance(statistic, data, n_boot, seed)
    else:
        var = plugin_variance(kind, data, kernel, h, method)
    record.variance_hat = var.sigma_hat
    record.ci = confidence_interval(theta, var.sigma_hat, data.n, ci_level)
    return record


class _SemiparametricEstimator(BaseEstimator):
    def _validate(self, X, y=None) -> Dataset:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        X = check_array(X, ensure_min_samples=2)
        if y is not None:
            y = check_array(y, ensure_2d=False, ensure_min_samples=2)
            if y.ndim != 1 or y.shape[0] != X.shape[0]:
                raise ValueError(f"y must be 1-d with {X.shape[0]} entries")
        return Dataset(X, y)

    def _method(self, kind: EstimatorKind, kernel: KernelSpec) -> Method:
        return resolve_method(self.correction, kind, kernel, self.etas, self.scales)

    def _fit(self, data: Dataset, kind: EstimatorKind, **grid):
        kernel = gaussian(data.d)
        method = self._method(kind, kernel)
        seed = np.random.SeedSequence() if self.random_state is None else self.random_state
        record = estimate(
            kind,
            data,
            self.bandwidth,
            method,
            kernel,
            ci_level=self.ci_level,
            n_boot=self.n_bootstrap,
            seed=seed,
            **grid,
        )
        self.record_ = record
        self.theta_ = record.theta_hat
        self.b_nl_ = record.b_nl_hat
        self.b_anb_ = record.b_anb_hat
        self.variance_ = record.variance_hat
        self.ci_ = record.ci
        self.n_samples_ = data.n
        self.n_features_in_ = data.d
        self.method_ = method
        return self

    def confidence_interval(self, level: float = 0.95):
        """Normal interval around ``theta_`` at another confidence level."""
        check_is_fitted(self, "theta_")
        if self.variance_ is None:
            raise ValueError("estimator was fitted with ci_level=None; no variance available")
        return confidence_interval(self.theta_, self.variance_, self.n_samples_, level)


class AverageDensity(_SemiparametricEstimator):
    """Leave-one-out average density estimator.

    Parameters
    ----------
    bandwidth : float
        Kernel bandwidth h.
    correction : {"raw", "abc", "2sj", "3sj", "5sj", "msj"}
        Bias correction.  ``"abc"`` is equivalent to using the twicing kernel.
    etas, scales
        Jackknife bandwidth multipliers and scheme, see :func:`resolve_method`.
    ci_level : float or None
        Confidence level of ``ci_``; ``None`` skips variance estimation.
    n_bootstrap : int, optional
        Bootstrap the variance with this many resamples instead of the
        plug-in estimate.
    random_state : int, optional
        Seed of the bootstrap streams.

    Attributes
    ----------
    theta_, b_nl_, b_anb_, variance_, ci_, record_
    """

    def __init__(
        self,
        bandwidth: float = 0.2,
        correction: str = "raw",
        etas=None,
        scales=None,
        ci_level: Optional[float] = 0.95,
        n_bootstrap: Optional[int] = None,
        random_state=None,
    ):
        self.bandwidth = bandwidth
        self.correction = correction
        self.etas = etas
        self.scales = scales
        self.ci_level = ci_level
        self.n_bootstrap = n_bootstrap
        self.random_state = random_state

    def fit(self, X, y=None):
        data = self._validate(X)
        return self._fit(data, EstimatorKind(Kind.AD))


class IntegratedSquaredDensity(_SemiparametricEstimator):
    """Integrated squared density estimator (univariate).

    Takes the parameters of :class:`AverageDensity` plus the integration grid
    ``[min(x) - grid_margin, max(x) + grid_margin]`` with ``grid_points``
    nodes.
    """

    def __init__(
        self,
        bandwidth: float = 0.2,
        correction: str = "raw",
        etas=None,
        scales=None,
        ci_level: Optional[float] = 0.95,
        n_bootstrap: Optional[int] = None,
        random_state=None,
        grid_margin: float = DEFAULT_GRID_MARGIN,
        grid_points: int = DEFAULT_GRID_POINTS,
    ):
        self.bandwidth = bandwidth
        self.correction = correction
        self.etas = etas
        self.scales = scales
        self.ci_level = ci_level
        self.n_bootstrap = n_bootstrap
        self.random_state = random_state
        self.grid_margin = grid_margin
        self.grid_points = grid_points

    def fit(self, X, y=None):
        data = self._validate(X)
        return self._fit(
            data,
            EstimatorKind(Kind.ISD),
            grid_margin=self.grid_margin,
            grid_points=self.grid_points,
        )


class DensityWeightedAverageDerivative(_SemiparametricEstimator):
    """Density-weighted average derivative of E[y | x], one coordinate.

    ``component`` selects the coordinate; the other parameters are those of
    :class:`AverageDensity`.  ``fit`` requires ``y``.
    """

    def __init__(
        self,
        bandwidth: float = 0.5,
        component: int = 0,
        correction: str = "raw",
        etas=None,
        scales=None,
        ci_level: Optional[float] = 0.95,
        n_bootstrap: Optional[int] = None,
        random_state=None,
    ):
        self.bandwidth = bandwidth
        self.component = component
        self.correction = correction
        self.etas = etas
        self.scales = scales
        self.ci_level = ci_level
        self.n_bootstrap = n_bootstrap
        self.random_state = random_state

    def fit(self, X, y):
        if y is None:
            raise ValueError("DensityWeightedAverageDerivative.fit requires y")
        data = self._validate(X, y)
        return self._fit(data, EstimatorKind(Kind.DWAD, self.component))

