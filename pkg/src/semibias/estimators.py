"""Second-step semiparametric estimators.

* average density (AD): the mean of leave-one-out density estimates at the
  sample points, a second-order U-statistic;
* integrated squared density (ISD): the integral of the squared full-sample
  density estimate, computed on a grid (the closed-form double sum is kept
  as an oracle);
* density-weighted average derivative (DWAD): one coordinate of
  -2/n sum_i grad f_hat(x_i) y_i with a leave-one-out gradient.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .kernels import KernelSpec, self_convolution
from .smoothing import Dataset, GridSpec, kde, kernel_matrix, loo_gradient_matrix, loo_kde

__all__ = [
    "Kind",
    "EstimatorKind",
    "EstimateRecord",
    "ad_estimate",
    "isd_estimate",
    "isd_closed_form",
    "dwad_estimate",
    "dwad_pair_matrix",
]


class Kind(str, enum.Enum):
    AD = "ad"
    ISD = "isd"
    DWAD = "dwad"


@dataclass(frozen=True)
class EstimatorKind:
    kind: Kind
    component: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.component < 0:
            raise ValueError(f"component must be non-negative, got {self.component}")

    @property
    def label(self) -> str:
        return self.kind.value

    def validate(self, data: Dataset):
        if self.kind is Kind.ISD and data.d != 1:
            raise NotImplementedError("the ISD estimator is univariate only")
        if self.kind is Kind.DWAD:
            if data.responses is None:
                raise ValueError("the DWAD estimator needs responses")
            if self.component >= data.d:
                raise ValueError(
                    f"component {self.component} out of range for d={data.d}"
                )


@dataclass
class EstimateRecord:
    """Result of one (possibly bias-corrected) estimation.

    ``theta_hat`` always holds the final, corrected value; ``b_nl_hat`` and
    ``b_anb_hat`` record what was subtracted from the raw estimate (zero when
    the method does not estimate that term).
    """

    theta_hat: float
    bandwidth: float
    kind: EstimatorKind
    correction: str = "raw"
    etas: Tuple[float, ...] = ()
    b_nl_hat: float = 0.0
    b_anb_hat: float = 0.0
    variance_hat: Optional[float] = None
    ci: Optional[Tuple[float, float]] = None
    n: int = 0
    extras: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.ci is not None and self.ci[0] > self.ci[1]:
            raise ValueError(f"confidence interval bounds out of order: {self.ci}")


def ad_estimate(data: Dataset, kernel: KernelSpec, h: float, leave_one_out: bool = True) -> float:
    """Average density (1/n) sum_i f_hat(z_i).

    With ``leave_one_out=False`` the density at z_i includes z_i itself, which
    adds the singularity term K(0) / (n h^d) on average.
    """
    if leave_one_out:
        return float(np.mean(loo_kde(data, kernel, h)))
    return float(np.mean(kde(data, kernel, h, data.points)))


def isd_estimate(
    data: Dataset, kernel: KernelSpec, h: float, grid: Optional[GridSpec] = None
) -> float:
    """Integral of the squared full-sample density estimate over a grid."""
    if data.d != 1:
        raise NotImplementedError("the ISD estimator is univariate only")
    if grid is None:
        grid = GridSpec.around(data)
    x = grid.nodes()
    f = kernel_matrix(x[:, None], data.points, kernel, h).mean(axis=1)
    return float(np.trapezoid(f * f, x))


def isd_closed_form(data: Dataset, kernel: KernelSpec, h: float) -> float:
    """Exact integral of the squared KDE: (1/n^2) sum_ij (K*K)_h(z_i - z_j)."""
    conv = self_convolution(kernel)
    return float(kernel_matrix(data.points, data.points, conv, h).mean())


def dwad_pair_matrix(data: Dataset, kernel: KernelSpec, h: float, component: int = 0) -> np.ndarray:
    """Symmetric U-statistic kernel U_ij = h^{-(d+1)} K'_c((x_j - x_i)/h)(y_i - y_j).

    The DWAD estimate is the mean of the off-diagonal entries.
    """
    if data.responses is None:
        raise ValueError("the DWAD estimator needs responses")
    grad = loo_gradient_matrix(data, kernel, h, component)
    y = data.responses
    return grad * (y[:, None] - y[None, :])


def dwad_estimate(data: Dataset, kernel: KernelSpec, h: float, component: int = 0) -> float:
    """Density-weighted average derivative, coordinate ``component``.

    2 / (n(n-1)) sum_i sum_{j != i} h^{-(d+1)} K'_c((x_j - x_i)/h) y_i.
    """
    EstimatorKind(Kind.DWAD, component).validate(data)
    if data.n < 2:
        raise ValueError(f"the DWAD estimator needs n >= 2, got n={data.n}")
    n = data.n
    grad = loo_gradient_matrix(data, kernel, h, component)
    return float(2.0 * (grad.sum(axis=1) @ data.responses) / (n * (n - 1)))
