"""Multi-scale jackknife and analytical bias correction.

A jackknife scheme combines one estimator at bandwidths ``eta_q * h`` with
weights that sum to one and annihilate every targeted bias order: a bias
term proportional to ``h**p`` contributes the row ``sum_q w_q eta_q**p = 0``.
Smoothing biases have positive exponents (the kernel order m and above);
the nonlinear / singularity bias of order ``1 / (n h**d)`` has exponent -d.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .estimators import EstimatorKind, Kind, ad_estimate, dwad_estimate, isd_estimate
from .kernels import KernelSpec, combine, self_convolution
from .smoothing import Dataset, GridSpec, kernel_matrix, loo_kde

__all__ = [
    "ConditioningWarning",
    "SingularSchemeError",
    "Scales",
    "JackknifeScheme",
    "DEFAULT_ETAS",
    "solve_msj_weights",
    "default_scheme",
    "make_scheme",
    "raw_estimate",
    "msj_estimate",
    "abc_ad",
    "abc_isd",
    "abc_dwad",
]

CONDITION_WARN = 1e8


class ConditioningWarning(UserWarning):
    """The jackknife weight system is badly conditioned."""


class SingularSchemeError(ValueError):
    """The jackknife weight system has no unique solution."""


class Scales(str, enum.Enum):
    TWO_SCALE_SMOOTHING = "two_scale_smoothing"
    TWO_SCALE_NONLINEAR = "two_scale_nonlinear"
    THREE_SCALE = "three_scale"
    FIVE_SCALE_EVEN = "five_scale_even"


DEFAULT_ETAS = {
    Scales.TWO_SCALE_SMOOTHING: (1.0, 1.25),
    Scales.TWO_SCALE_NONLINEAR: (1.0, 1.25),
    Scales.THREE_SCALE: (1.0, 1.25, 1.5),
    Scales.FIVE_SCALE_EVEN: (3 / 5, 4 / 5, 1.0, 6 / 5, 7 / 5),
}


def solve_msj_weights(etas: Sequence[float], exponents: Sequence[float]) -> np.ndarray:
    """Solve for jackknife weights.

    Parameters
    ----------
    etas : sequence of float
        Q distinct positive bandwidth multipliers.
    exponents : sequence of float
        Q - 1 nonzero bias exponents to annihilate.

    Returns
    -------
    ndarray of shape (Q,)

    Raises
    ------
    SingularSchemeError
        On repeated etas or otherwise singular systems.
    """
    etas = np.asarray(etas, dtype=float)
    exponents = np.asarray(exponents, dtype=float)
    q = etas.shape[0]
    if q < 1:
        raise ValueError("at least one scale is required")
    if exponents.shape[0] != q - 1:
        raise ValueError(f"{q} scales need {q - 1} exponents, got {exponents.shape[0]}")
    if np.any(etas <= 0):
        raise ValueError(f"etas must be positive, got {etas.tolist()}")
    if np.unique(etas).shape[0] != q:
        raise SingularSchemeError(f"etas must be distinct, got {etas.tolist()}")
    if np.any(exponents == 0):
        raise SingularSchemeError("a zero exponent duplicates the sum-to-one row")
    system = np.vstack([np.ones(q)] + [etas**p for p in exponents])
    rhs = np.zeros(q)
    rhs[0] = 1.0
    cond = np.linalg.cond(system)
    if not np.isfinite(cond):
        raise SingularSchemeError(f"singular weight system for etas={etas.tolist()}")
    if cond > CONDITION_WARN:
        warnings.warn(
            f"jackknife weight system condition number {cond:.3g} exceeds {CONDITION_WARN:g}",
            ConditioningWarning,
            stacklevel=2,
        )
    try:
        weights = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSchemeError(str(exc)) from exc
    return weights


def default_scheme(kind: EstimatorKind, m: int, d: int, scales: Scales) -> Tuple[float, ...]:
    """Bias exponents targeted by a named scheme for kernel order m in dimension d."""
    if m < 2 or m % 2:
        raise ValueError(f"kernel order must be a positive even integer, got {m}")
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    scales = Scales(scales)
    if scales is Scales.TWO_SCALE_SMOOTHING:
        return (float(m),)
    if scales is Scales.TWO_SCALE_NONLINEAR:
        return (float(-d),)
    if scales is Scales.THREE_SCALE:
        return (float(m), float(-d))
    return (float(m), float(m + 2), float(m + 4), float(-d))


@dataclass(frozen=True)
class JackknifeScheme:
    etas: Tuple[float, ...]
    exponents: Tuple[float, ...]
    weights: Tuple[float, ...]
    name: str = "msj"

    @classmethod
    def solve(cls, etas: Sequence[float], exponents: Sequence[float], name: str = "msj"):
        weights = solve_msj_weights(etas, exponents)
        return cls(
            tuple(float(e) for e in etas),
            tuple(float(p) for p in exponents),
            tuple(float(w) for w in weights),
            name,
        )

    @property
    def size(self) -> int:
        return len(self.etas)

    def bandwidths(self, h: float) -> Tuple[float, ...]:
        return tuple(e * h for e in self.etas)

    def equivalent_kernel(self, kernel: KernelSpec) -> KernelSpec:
        """Kernel whose estimate at h equals the weighted combination (linear estimators)."""
        return combine(kernel, self.weights, self.etas)

    def residuals(self) -> np.ndarray:
        etas = np.asarray(self.etas)
        w = np.asarray(self.weights)
        rows = [w.sum() - 1.0] + [w @ etas**p for p in self.exponents]
        return np.asarray(rows)


def make_scheme(
    kind: EstimatorKind,
    kernel: KernelSpec,
    scales: Scales,
    etas: Optional[Sequence[float]] = None,
    name: Optional[str] = None,
) -> JackknifeScheme:
    scales = Scales(scales)
    exponents = default_scheme(kind, kernel.order_m, kernel.dim_d, scales)
    etas = DEFAULT_ETAS[scales] if etas is None else tuple(etas)
    return JackknifeScheme.solve(etas, exponents, name or scales.value)


def raw_estimate(
    kind: EstimatorKind,
    data: Dataset,
    kernel: KernelSpec,
    h: float,
    grid: Optional[GridSpec] = None,
) -> float:
    if kind.kind is Kind.AD:
        return ad_estimate(data, kernel, h)
    if kind.kind is Kind.ISD:
        return isd_estimate(data, kernel, h, grid)
    return dwad_estimate(data, kernel, h, kind.component)


def msj_estimate(
    kind: EstimatorKind,
    data: Dataset,
    kernel: KernelSpec,
    h: float,
    scheme: JackknifeScheme,
    grid: Optional[GridSpec] = None,
    estimator: Optional[Callable[[float], float]] = None,
) -> float:
    """sum_q w_q theta_hat(eta_q h).

    ``estimator`` overrides the raw estimator as a function of the bandwidth.
    """
    if estimator is None:
        if kind.kind is Kind.ISD and grid is None:
            grid = GridSpec.around(data)

        def estimator(b):
            return raw_estimate(kind, data, kernel, b, grid)

    return float(sum(w * estimator(b) for w, b in zip(scheme.weights, scheme.bandwidths(h))))


def abc_ad(data: Dataset, kernel: KernelSpec, h: float) -> Tuple[float, float]:
    """Analytical correction of the AD estimator.

    Returns ``(b_anb_hat, corrected)`` with b_anb_hat the mean over i of the
    smoothed minus the plain leave-one-out density at z_i.
    """
    plain = loo_kde(data, kernel, h)
    smoothed = loo_kde(data, self_convolution(kernel), h)
    b_anb = float(np.mean(smoothed - plain))
    return b_anb, float(np.mean(plain)) - b_anb


def abc_isd(
    data: Dataset, kernel: KernelSpec, h: float, grid: Optional[GridSpec] = None
) -> Tuple[float, float, float]:
    """Analytical correction of the ISD estimator.

    Returns ``(b_nl_hat, b_anb_hat, corrected)``.  The nonlinear bias is the
    closed form int K^2 / (n h^d); the smoothing bias is
    2 int f_hat (f_bar_hat - f_hat) on the grid, where f_bar_hat is the
    full-sample density estimate with the self-convolved kernel.
    """
    if data.d != 1:
        raise NotImplementedError("the ISD estimator is univariate only")
    if grid is None:
        grid = GridSpec.around(data)
    x = grid.nodes()[:, None]
    f = kernel_matrix(x, data.points, kernel, h).mean(axis=1)
    fbar = kernel_matrix(x, data.points, self_convolution(kernel), h).mean(axis=1)
    nodes = x[:, 0]
    theta = float(np.trapezoid(f * f, nodes))
    b_nl = kernel.roughness / (data.n * h**data.d)
    b_anb = float(2.0 * np.trapezoid(f * (fbar - f), nodes))
    return b_nl, b_anb, theta - b_nl - b_anb


def abc_dwad(data: Dataset, kernel: KernelSpec, h: float, component: int = 0) -> Tuple[float, float]:
    """Analytical correction of the DWAD estimator.

    The smoothed estimate uses the self-convolved kernel; b_nl_hat is its
    difference from the raw estimate and the corrected value is the twicing
    form 2 theta_hat - theta_bar_hat.  Returns ``(b_nl_hat, corrected)``.
    """
    theta = dwad_estimate(data, kernel, h, component)
    smoothed = dwad_estimate(data, self_convolution(kernel), h, component)
    b_nl = smoothed - theta
    return b_nl, theta - b_nl

