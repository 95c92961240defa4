"""First-step nonparametric estimators.

Full-sample and leave-one-out kernel density estimates, the leave-one-out
density gradient, the smoothed ("hat-bar") density and trapezoid integration
over a univariate grid.  Every function is vectorised over the evaluation
index: pass ``i=None`` to get the values at all sample points at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .kernels import KernelSpec, derivative_eval, self_convolution

__all__ = [
    "Dataset",
    "GridSpec",
    "kde",
    "loo_kde",
    "kde_gradient",
    "smoothed_loo_kde",
    "grid_integrate",
    "kernel_matrix",
]

DEFAULT_GRID_POINTS = 500
DEFAULT_GRID_MARGIN = 4.0


@dataclass(frozen=True, eq=False)
class Dataset:
    """An i.i.d. sample of points, optionally paired with scalar responses.

    ``points`` is stored as an ``(n, d)`` float array.  Duplicate rows are
    legal (bootstrap resamples produce them).
    """

    points: np.ndarray
    responses: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError("points must be a non-empty (n, d) array")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points contain non-finite values")
        object.__setattr__(self, "points", pts)
        if self.responses is not None:
            y = np.asarray(self.responses, dtype=float).ravel()
            if y.shape[0] != pts.shape[0]:
                raise ValueError(
                    f"responses has length {y.shape[0]}, expected {pts.shape[0]}"
                )
            if not np.all(np.isfinite(y)):
                raise ValueError("responses contain non-finite values")
            object.__setattr__(self, "responses", y)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def take(self, indices) -> "Dataset":
        """Rows at ``indices`` (with repetition), e.g. a bootstrap resample."""
        idx = np.asarray(indices)
        y = None if self.responses is None else self.responses[idx]
        return Dataset(self.points[idx], y)

    def shifted(self, offset) -> "Dataset":
        return Dataset(self.points + np.asarray(offset, dtype=float), self.responses)


@dataclass(frozen=True)
class GridSpec:
    lower: float
    upper: float
    n_grid: int = DEFAULT_GRID_POINTS

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"grid lower {self.lower} must be below upper {self.upper}")
        if self.n_grid < 2:
            raise ValueError(f"n_grid must be at least 2, got {self.n_grid}")

    @classmethod
    def around(
        cls,
        data: Dataset,
        margin: float = DEFAULT_GRID_MARGIN,
        n_grid: int = DEFAULT_GRID_POINTS,
    ) -> "GridSpec":
        """[min(z) - margin, max(z) + margin] with ``n_grid`` points."""
        if data.d != 1:
            raise NotImplementedError("grid integration is univariate only")
        z = data.points[:, 0]
        return cls(float(z.min()) - margin, float(z.max()) + margin, n_grid)

    def nodes(self) -> np.ndarray:
        return np.linspace(self.lower, self.upper, self.n_grid)


def _require_loo(data: Dataset, i):
    if data.n < 2:
        raise ValueError(f"leave-one-out estimates need n >= 2, got n={data.n}")
    if i is not None and not (0 <= i < data.n):
        raise IndexError(f"index {i} out of range for n={data.n}")


def _check_bandwidth(h):
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h}")


def kernel_matrix(x: np.ndarray, z: np.ndarray, kernel: KernelSpec, h: float) -> np.ndarray:
    """Matrix of K_h(x_a - z_b) for ``x`` (m, d) and ``z`` (n, d)."""
    _check_bandwidth(h)
    d = kernel.dim_d
    if x.shape[1] != d or z.shape[1] != d:
        raise ValueError(f"points have dimension {z.shape[1]}, kernel expects {d}")
    if kernel.is_closed_form:
        if d == 1:
            r2 = (x[:, 0, None] - z[None, :, 0]) ** 2
        else:
            r2 = ((x[:, None, :] - z[None, :, :]) ** 2).sum(axis=-1)
        return kernel.radial(r2 / (h * h)) / h**d
    return kernel.radial_profile((x[:, 0, None] - z[None, :, 0]) / h) / h


def _loo_sums(data: Dataset, kernel: KernelSpec, h: float) -> np.ndarray:
    mat = kernel_matrix(data.points, data.points, kernel, h)
    np.fill_diagonal(mat, 0.0)
    return mat.sum(axis=1)


def kde(data: Dataset, kernel: KernelSpec, h: float, x) -> np.ndarray | float:
    """Full-sample density estimate (1/n) sum_i K_h(x - z_i).

    ``x`` is a single point (shape ``(d,)``, or a scalar when d = 1) or an
    ``(m, d)`` array of points.  A single point returns a float.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 0 or (x.ndim == 1 and data.d > 1)
    if x.ndim == 0:
        pts = x.reshape(1, 1)
    elif x.ndim == 1:
        pts = x.reshape(1, -1) if single else x[:, None]
    else:
        pts = x
    vals = kernel_matrix(pts, data.points, kernel, h).mean(axis=1)
    return float(vals[0]) if single else vals


def loo_kde(data: Dataset, kernel: KernelSpec, h: float, i: Optional[int] = None):
    """Leave-one-out density (1/(n-1)) sum_{j != i} K_h(z_i - z_j)."""
    _require_loo(data, i)
    sums = _loo_sums(data, kernel, h) / (data.n - 1)
    return sums if i is None else float(sums[i])


def smoothed_loo_kde(data: Dataset, kernel: KernelSpec, h: float, i: Optional[int] = None):
    """Leave-one-out hat-bar density: loo_kde with the self-convolved kernel."""
    return loo_kde(data, self_convolution(kernel), h, i)


def loo_gradient_matrix(data: Dataset, kernel: KernelSpec, h: float, component: Optional[int] = None):
    """Pairwise h^{-(d+1)} grad K((x_j - x_i)/h), zero on the diagonal.

    Returns an ``(n, n, d)`` array, or ``(n, n)`` when ``component`` is given.
    """
    _check_bandwidth(h)
    x = data.points
    d = data.d
    if kernel.dim_d != d:
        raise ValueError(f"points have dimension {d}, kernel expects {kernel.dim_d}")
    diff = (x[None, :, :] - x[:, None, :]) / h
    if kernel.is_closed_form:
        slope = kernel.radial_slope((diff**2).sum(axis=-1)) / h ** (d + 1)
        np.fill_diagonal(slope, 0.0)
        if component is not None:
            return slope * diff[..., component]
        return slope[..., None] * diff
    grad = derivative_eval(kernel, diff) / h ** (d + 1)
    idx = np.arange(data.n)
    grad[idx, idx, :] = 0.0
    return grad if component is None else grad[..., component]


def kde_gradient(data: Dataset, kernel: KernelSpec, h: float, i: Optional[int] = None):
    """Leave-one-out density gradient at x_i.

    -1 / ((n-1) h^{d+1}) * sum_{j != i} grad K((x_j - x_i) / h); shape ``(d,)``
    for one index or ``(n, d)`` for all.
    """
    _require_loo(data, i)
    grads = -loo_gradient_matrix(data, kernel, h).sum(axis=1) / (data.n - 1)
    return grads if i is None else grads[i]


def grid_integrate(f: Callable[[np.ndarray], np.ndarray], grid: GridSpec) -> float:
    """Trapezoid integral of a vectorised univariate ``f`` over ``grid``."""
    x = grid.nodes()
    return float(np.trapezoid(np.asarray(f(x), dtype=float), x))
