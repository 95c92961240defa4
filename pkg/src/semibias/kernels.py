"""Kernel functions, bandwidth scaling, twicing and self-convolution.

Every kernel derived from the Gaussian product kernel (its twicing kernel,
its self-convolution, weighted multi-bandwidth combinations of either) is a
finite signed mixture of centred isotropic normal densities, so all of them
are evaluated in closed form.  Kernels built from an arbitrary univariate
profile fall back to trapezoid quadrature for their convolutions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "KernelFamily",
    "KernelSpec",
    "gaussian",
    "custom",
    "eval_kernel",
    "eval_scaled",
    "twicing",
    "self_convolution",
    "derivative_eval",
    "combine",
]

QUAD_POINTS = 2001
QUAD_HALF_WIDTH = 8.0
_FD_STEP = 1e-5


class KernelFamily(str, enum.Enum):
    GAUSSIAN = "gaussian"
    TWICING = "twicing"
    CONVOLUTION = "convolution"
    COMBINATION = "combination"
    CUSTOM = "custom"


Mixture = Tuple[Tuple[float, float], ...]


@dataclass(frozen=True)
class KernelSpec:
    """An immutable symmetric kernel on R^d.

    Parameters
    ----------
    family : KernelFamily
        How the kernel was built.
    order_m : int
        Kernel order (first non-vanishing moment).
    dim_d : int
        Dimension of the argument.
    base : KernelSpec, optional
        Kernel this one was derived from (twicing, convolution, combination).
    mixture : tuple of (weight, variance), optional
        Exact representation as ``sum_k w_k N(0, v_k I_d)``.  Present for every
        Gaussian-derived kernel; ``None`` for quadrature-backed kernels.
    scale : float
        Standard deviation of the kernel, used to size quadrature ranges.
    """

    family: KernelFamily
    order_m: int
    dim_d: int
    base: Optional["KernelSpec"] = None
    mixture: Optional[Mixture] = None
    scale: float = 1.0
    profile: Optional[Callable[[np.ndarray], np.ndarray]] = field(
        default=None, compare=False, repr=False
    )
    profile_derivative: Optional[Callable[[np.ndarray], np.ndarray]] = field(
        default=None, compare=False, repr=False
    )
    terms: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.dim_d < 1:
            raise ValueError(f"dim_d must be a positive integer, got {self.dim_d}")
        if self.order_m < 1:
            raise ValueError(f"order_m must be positive, got {self.order_m}")
        if self.mixture is None and self.dim_d != 1:
            raise ValueError("quadrature-backed kernels are univariate only")

    @property
    def is_closed_form(self) -> bool:
        return self.mixture is not None

    @property
    def at_zero(self) -> float:
        """K(0)."""
        return float(eval_kernel(self, np.zeros(self.dim_d)))

    @property
    def roughness(self) -> float:
        """The integral of K(u)^2 over R^d."""
        if self.mixture is not None:
            d = self.dim_d
            return float(
                sum(
                    wa * wb * (2.0 * np.pi * (va + vb)) ** (-d / 2.0)
                    for wa, va in self.mixture
                    for wb, vb in self.mixture
                )
            )
        v = _quad_nodes(self)
        return float(np.trapezoid(self.radial_profile(v) ** 2, v))

    # vectorised evaluators on arrays shaped (..., d)

    def __call__(self, u) -> np.ndarray:
        return eval_kernel(self, u)

    def radial(self, sq_norm: np.ndarray) -> np.ndarray:
        """K evaluated from squared Euclidean norms (closed-form kernels only)."""
        if self.mixture is None:
            return self.radial_profile(np.sqrt(sq_norm))
        sq_norm = np.asarray(sq_norm, dtype=float)
        d = self.dim_d
        out = np.zeros_like(sq_norm)
        for w, v in self.mixture:
            out += (w * (2.0 * np.pi * v) ** (-d / 2.0)) * np.exp(sq_norm * (-0.5 / v))
        return out

    def radial_slope(self, sq_norm: np.ndarray) -> np.ndarray:
        """g(r2) with grad K(u) = g(|u|^2) * u (closed-form kernels only)."""
        if self.mixture is None:
            raise TypeError("radial_slope requires a closed-form kernel")
        sq_norm = np.asarray(sq_norm, dtype=float)
        d = self.dim_d
        out = np.zeros_like(sq_norm)
        for w, v in self.mixture:
            out -= (w / v * (2.0 * np.pi * v) ** (-d / 2.0)) * np.exp(sq_norm * (-0.5 / v))
        return out

    def radial_profile(self, u: np.ndarray) -> np.ndarray:
        """Univariate evaluation on a plain array of scalars."""
        u = np.asarray(u, dtype=float)
        if self.mixture is not None:
            return self.radial(u * u)
        if self.family is KernelFamily.CUSTOM:
            return np.asarray(self.profile(u), dtype=float)
        if self.family is KernelFamily.TWICING:
            return 2.0 * self.base.radial_profile(u) - _quad_convolve(self.base, u)
        if self.family is KernelFamily.CONVOLUTION:
            return _quad_convolve(self.base, u)
        if self.family is KernelFamily.COMBINATION:
            out = np.zeros_like(u)
            for w, eta in self.terms:
                out += w * self.base.radial_profile(u / eta) / eta
            return out
        raise TypeError(f"cannot evaluate kernel family {self.family}")


def _check_point(kernel: KernelSpec, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim == 0 and kernel.dim_d == 1:
        u = u.reshape(1)
    if u.ndim == 0 or u.shape[-1] != kernel.dim_d:
        raise ValueError(
            f"argument has trailing dimension {u.shape[-1] if u.ndim else 0}, "
            f"kernel expects {kernel.dim_d}"
        )
    return u


def _quad_nodes(kernel: KernelSpec) -> np.ndarray:
    half = QUAD_HALF_WIDTH * kernel.scale
    return np.linspace(-half, half, QUAD_POINTS)


def _quad_convolve(kernel: KernelSpec, u: np.ndarray) -> np.ndarray:
    v = _quad_nodes(kernel)
    kv = kernel.radial_profile(v)
    flat = np.ravel(u)
    vals = kernel.radial_profile(flat[:, None] - v[None, :]) * kv[None, :]
    return np.trapezoid(vals, v, axis=1).reshape(np.shape(u))


def gaussian(dim: int = 1) -> KernelSpec:
    """Standard normal product kernel on R^dim."""
    return KernelSpec(KernelFamily.GAUSSIAN, 2, dim, mixture=((1.0, 1.0),))


def custom(
    profile: Callable[[np.ndarray], np.ndarray],
    order: int = 2,
    scale: float = 1.0,
    derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> KernelSpec:
    """Univariate kernel from a vectorised profile function.

    ``scale`` is the kernel's standard deviation; convolutions integrate over
    ``+-8 * scale`` with the trapezoid rule.
    """
    return KernelSpec(
        KernelFamily.CUSTOM,
        order,
        1,
        scale=scale,
        profile=profile,
        profile_derivative=derivative,
    )


def eval_kernel(kernel: KernelSpec, u) -> np.ndarray:
    """K(u) for ``u`` shaped ``(..., d)``; returns shape ``(...)``."""
    u = _check_point(kernel, u)
    if kernel.mixture is not None:
        return kernel.radial(np.einsum("...i,...i->...", u, u))
    return kernel.radial_profile(u[..., 0])


def eval_scaled(kernel: KernelSpec, h: float, diff) -> np.ndarray:
    """K_h(diff) = K(diff / h) / h^d."""
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    diff = _check_point(kernel, diff)
    return eval_kernel(kernel, diff / h) / h**kernel.dim_d


def _mixture_convolve(a: Mixture, b: Mixture) -> Mixture:
    merged: dict = {}
    for wa, va in a:
        for wb, vb in b:
            merged[va + vb] = merged.get(va + vb, 0.0) + wa * wb
    return tuple((w, v) for v, w in sorted(merged.items()))


def _mixture_add(*parts: Tuple[float, Mixture]) -> Mixture:
    merged: dict = {}
    for coef, mix in parts:
        for w, v in mix:
            merged[v] = merged.get(v, 0.0) + coef * w
    return tuple((w, v) for v, w in sorted(merged.items()) if w != 0.0)


def self_convolution(kernel: KernelSpec) -> KernelSpec:
    """K * K; for the Gaussian kernel this is the N(0, 2 I_d) density."""
    mixture = None
    if kernel.mixture is not None:
        mixture = _mixture_convolve(kernel.mixture, kernel.mixture)
    return KernelSpec(
        KernelFamily.CONVOLUTION,
        kernel.order_m,
        kernel.dim_d,
        base=kernel,
        mixture=mixture,
        scale=kernel.scale * np.sqrt(2.0),
    )


def twicing(kernel: KernelSpec) -> KernelSpec:
    """Twicing kernel 2K - K * K, of order 2m for a base of order m."""
    mixture = None
    if kernel.mixture is not None:
        conv = _mixture_convolve(kernel.mixture, kernel.mixture)
        mixture = _mixture_add((2.0, kernel.mixture), (-1.0, conv))
    return KernelSpec(
        KernelFamily.TWICING,
        2 * kernel.order_m,
        kernel.dim_d,
        base=kernel,
        mixture=mixture,
        scale=kernel.scale * np.sqrt(2.0),
    )


def combine(kernel: KernelSpec, weights: Sequence[float], etas: Sequence[float]) -> KernelSpec:
    """Equivalent kernel of sum_q w_q K_{eta_q h}, expressed at bandwidth h.

    Any estimator that is linear in the kernel, evaluated with this kernel at
    bandwidth h, equals the weighted combination of that estimator over the
    bandwidths eta_q * h.
    """
    if len(weights) != len(etas):
        raise ValueError("weights and etas must have equal length")
    terms = tuple((float(w), float(e)) for w, e in zip(weights, etas))
    mixture = None
    if kernel.mixture is not None:
        mixture = _mixture_add(
            *((w, tuple((c, v * e * e) for c, v in kernel.mixture)) for w, e in terms)
        )
    return KernelSpec(
        KernelFamily.COMBINATION,
        kernel.order_m,
        kernel.dim_d,
        base=kernel,
        mixture=mixture,
        scale=kernel.scale * max(e for _, e in terms),
        terms=terms,
    )


def derivative_eval(kernel: KernelSpec, u) -> np.ndarray:
    """Gradient of K at ``u``; returns an array shaped like ``u``."""
    u = _check_point(kernel, u)
    if kernel.mixture is not None:
        r2 = np.einsum("...i,...i->...", u, u)
        return kernel.radial_slope(r2)[..., None] * u
    x = u[..., 0]
    if kernel.family is KernelFamily.CUSTOM and kernel.profile_derivative is not None:
        return np.asarray(kernel.profile_derivative(x), dtype=float)[..., None]
    step = _FD_STEP * kernel.scale
    grad = (kernel.radial_profile(x + step) - kernel.radial_profile(x - step)) / (2 * step)
    return grad[..., None]
