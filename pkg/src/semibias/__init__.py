"""Kernel-based semiparametric estimators with bias-robust inference."""

from .api import (
    AverageDensity,
    DensityWeightedAverageDerivative,
    IntegratedSquaredDensity,
    Method,
    estimate,
    resolve_method,
)
from .bias_correction import (
    JackknifeScheme,
    Scales,
    abc_ad,
    abc_dwad,
    abc_isd,
    default_scheme,
    msj_estimate,
    solve_msj_weights,
)
from .estimators import (
    EstimateRecord,
    EstimatorKind,
    Kind,
    ad_estimate,
    dwad_estimate,
    isd_closed_form,
    isd_estimate,
)
from .inference import (
    VarianceEstimate,
    bootstrap_variance,
    confidence_interval,
    t_statistic,
    variance_ad,
    variance_dwad,
    variance_isd,
)
from .kernels import KernelSpec, gaussian, self_convolution, twicing
from .smoothing import Dataset, GridSpec, kde, kde_gradient, loo_kde, smoothed_loo_kde

__version__ = "0.1.0"
