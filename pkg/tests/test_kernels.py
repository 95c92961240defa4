import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from semibias.kernels import (
    KernelFamily,
    combine,
    custom,
    derivative_eval,
    eval_kernel,
    eval_scaled,
    gaussian,
    self_convolution,
    twicing,
)

from conftest import phi


def epanechnikov():
    def profile(u):
        u = np.asarray(u, dtype=float)
        return np.where(np.abs(u) <= 1, 0.75 * (1 - u * u), 0.0)

    return custom(profile, order=2, scale=np.sqrt(0.2))


def epanechnikov_conv(u):
    # closed form of the Epanechnikov self-convolution on |u| <= 2
    a = np.abs(np.asarray(u, dtype=float))
    val = (3 / 160) * (2 - a) ** 3 * (a * a + 6 * a + 4)
    return np.where(a <= 2, val, 0.0)


class TestEval:
    def test_gaussian_values(self):
        k1, k2 = gaussian(1), gaussian(2)
        assert eval_kernel(k1, 0.0) == pytest.approx(0.3989423, abs=1e-7)
        assert eval_kernel(k1, 1.0) == pytest.approx(0.2419707, abs=1e-7)
        assert eval_kernel(k2, [0.0, 0.0]) == pytest.approx(0.1591549, abs=1e-7)

    def test_product_form(self, rng):
        u = rng.normal(size=(50, 3))
        np.testing.assert_allclose(eval_kernel(gaussian(3), u), phi(u).prod(axis=1), rtol=1e-13)

    def test_symmetric(self, rng):
        u = rng.normal(size=(20, 2))
        k = twicing(gaussian(2))
        np.testing.assert_array_equal(eval_kernel(k, u), eval_kernel(k, -u))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            eval_kernel(gaussian(2), np.zeros(3))

    def test_scaled_values(self):
        k = gaussian(1)
        assert eval_scaled(k, 2.0, 0.0) == pytest.approx(0.1994711, abs=1e-7)
        assert eval_scaled(k, 1.0, 1.0) == pytest.approx(0.2419707, abs=1e-7)
        assert eval_scaled(k, 0.5, 1.0) == pytest.approx(0.1079819, abs=1e-7)

    @pytest.mark.parametrize("h", [0.0, -1.0, np.nan])
    def test_bad_bandwidth(self, h):
        with pytest.raises(ValueError):
            eval_scaled(gaussian(1), h, 0.0)

    @given(
        h=st.floats(0.05, 5.0),
        x=st.lists(st.floats(-5, 5), min_size=2, max_size=2),
    )
    def test_scaled_identity(self, h, x):
        k = gaussian(2)
        x = np.asarray(x)
        assert eval_scaled(k, h, x) * h**2 == pytest.approx(float(eval_kernel(k, x / h)), rel=1e-14)

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_unit_mass(self, d):
        g = np.linspace(-8, 8, 161 if d == 3 else 801)
        mesh = np.stack(np.meshgrid(*([g] * d), indexing="ij"), axis=-1)
        for k in (gaussian(d), twicing(gaussian(d)), self_convolution(gaussian(d))):
            vals = eval_kernel(k, mesh)
            mass = vals
            for _ in range(d):
                mass = np.trapezoid(mass, g, axis=0)
            assert mass == pytest.approx(1.0, abs=1e-6)


class TestTwicing:
    def test_values(self):
        k = twicing(gaussian(1))
        assert k.family is KernelFamily.TWICING
        assert k.order_m == 4
        assert eval_kernel(k, 0.0) == pytest.approx(0.5157898, abs=1e-7)
        # exact 2 phi(1) - N(0,2)(1) = 0.26424580; 0.2642456 is built from rounded terms
        assert eval_kernel(k, 1.0) == pytest.approx(0.2642456, abs=5e-7)
        assert eval_kernel(k, 1.0) == pytest.approx(2 * phi(1.0) - phi(1.0, 2.0), rel=1e-14)

    def test_moments(self):
        k = twicing(gaussian(1))
        u = np.linspace(-12, 12, 20001)
        vals = eval_kernel(k, u[:, None])
        assert np.trapezoid(vals, u) == pytest.approx(1.0, abs=1e-9)
        assert np.trapezoid(u * u * vals, u) == pytest.approx(0.0, abs=1e-6)
        # fourth moment is where the bias now starts: 2*3 - 12 = -6
        assert np.trapezoid(u**4 * vals, u) == pytest.approx(-6.0, abs=1e-5)


class TestConvolution:
    def test_gaussian(self):
        k = self_convolution(gaussian(1))
        assert k.mixture == ((1.0, 2.0),)
        assert eval_kernel(k, 0.0) == pytest.approx(0.2820948, abs=1e-7)
        # (4 pi)^{-3/2} = 0.02244839
        assert eval_kernel(self_convolution(gaussian(3)), np.zeros(3)) == pytest.approx(
            0.0224485, abs=5e-7
        )

    def test_roughness_is_conv_at_zero(self):
        for d in (1, 2, 3):
            k = gaussian(d)
            assert k.roughness == pytest.approx(self_convolution(k).at_zero, rel=1e-14)
            assert k.roughness == pytest.approx((4 * np.pi) ** (-d / 2), rel=1e-14)

    def test_quadrature_fallback(self):
        k = epanechnikov()
        conv = self_convolution(k)
        assert not conv.is_closed_form
        u = np.linspace(-2.5, 2.5, 41)
        np.testing.assert_allclose(eval_kernel(conv, u[:, None]), epanechnikov_conv(u), atol=2e-5)
        assert k.roughness == pytest.approx(0.6, abs=1e-5)

    def test_quadrature_twicing(self):
        k = epanechnikov()
        tw = twicing(k)
        u = np.linspace(-2.5, 2.5, 41)
        expected = 2 * k(u[:, None]) - epanechnikov_conv(u)
        np.testing.assert_allclose(eval_kernel(tw, u[:, None]), expected, atol=4e-5)

    def test_quadrature_matches_closed_form(self):
        # a Gaussian profile pushed through the generic path
        k = custom(lambda u: phi(u), order=2, scale=1.0, derivative=lambda u: -u * phi(u))
        u = np.linspace(-4, 4, 33)[:, None]
        np.testing.assert_allclose(
            eval_kernel(self_convolution(k), u),
            eval_kernel(self_convolution(gaussian(1)), u),
            atol=1e-9,
        )

    def test_multivariate_custom_rejected(self):
        from semibias.kernels import KernelSpec

        with pytest.raises(ValueError):
            KernelSpec(KernelFamily.CUSTOM, 2, 2, profile=phi)


class TestDerivative:
    def test_values(self):
        k = gaussian(1)
        assert derivative_eval(k, 0.0)[0] == 0.0
        assert derivative_eval(k, 1.0)[0] == pytest.approx(-0.2419707, abs=1e-7)
        assert derivative_eval(k, -1.0)[0] == pytest.approx(0.2419707, abs=1e-7)

    @pytest.mark.parametrize(
        "make", [lambda: gaussian(3), lambda: twicing(gaussian(2)), lambda: self_convolution(gaussian(1))]
    )
    def test_finite_differences(self, make, rng):
        k = make()
        d = k.dim_d
        u = rng.normal(scale=1.5, size=(100, d))
        grad = derivative_eval(k, u)
        step = 1e-5
        for c in range(d):
            e = np.zeros(d)
            e[c] = step
            fd = (eval_kernel(k, u + e) - eval_kernel(k, u - e)) / (2 * step)
            np.testing.assert_allclose(grad[:, c], fd, atol=1e-6)

    def test_custom_without_derivative(self):
        k = custom(lambda u: phi(u), scale=1.0)
        u = np.linspace(-3, 3, 13)
        np.testing.assert_allclose(derivative_eval(k, u[:, None])[:, 0], -u * phi(u), atol=1e-8)


class TestCombine:
    def test_combined_kernel_is_weighted_sum(self, rng):
        k = gaussian(2)
        w, etas = (2.5, -1.5), (1.0, 1.3)
        comb = combine(k, w, etas)
        u = rng.normal(size=(30, 2))
        expected = sum(wq * eval_kernel(k, u / e) / e**2 for wq, e in zip(w, etas))
        np.testing.assert_allclose(eval_kernel(comb, u), expected, rtol=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            combine(gaussian(1), (1.0,), (1.0, 2.0))
