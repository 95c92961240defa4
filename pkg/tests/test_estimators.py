import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from semibias.estimators import (
    EstimateRecord,
    EstimatorKind,
    Kind,
    ad_estimate,
    dwad_estimate,
    dwad_pair_matrix,
    isd_closed_form,
    isd_estimate,
)
from semibias.kernels import derivative_eval, gaussian
from semibias.montecarlo import MixedNormalParams, sample_mixed_normal
from semibias.smoothing import Dataset, loo_kde

G1 = gaussian(1)


class TestAD:
    def test_values(self):
        assert ad_estimate(Dataset([0.0, 1.0]), G1, 1.0) == pytest.approx(0.2419707, abs=1e-7)
        assert ad_estimate(Dataset([0.0, 0.0]), G1, 1.0) == pytest.approx(0.3989423, abs=1e-7)

    def test_leave_in_adds_singularity(self, rng):
        data = Dataset(rng.normal(size=30))
        h = 0.4
        loo = ad_estimate(data, G1, h)
        inc = ad_estimate(data, G1, h, leave_one_out=False)
        assert inc == pytest.approx((1 - 1 / 30) * loo + G1.at_zero / (30 * h), rel=1e-12)

    def test_two_paths(self, rng):
        data = Dataset(rng.normal(size=50))
        assert ad_estimate(data, G1, 0.3) == pytest.approx(np.mean(loo_kde(data, G1, 0.3)), rel=1e-14)

    @given(seed=st.integers(0, 2**32 - 1))
    def test_permutation_invariant(self, seed):
        rng = np.random.default_rng(seed)
        data = Dataset(rng.normal(size=20))
        perm = data.take(rng.permutation(20))
        assert ad_estimate(perm, G1, 0.5) == pytest.approx(ad_estimate(data, G1, 0.5), rel=1e-13)


class TestISD:
    def test_values(self):
        assert isd_estimate(Dataset([0.0, 0.0]), G1, 1.0) == pytest.approx(0.2820948, abs=1e-4)
        assert isd_estimate(Dataset([0.0, 1.0]), G1, 1.0) == pytest.approx(0.2508953, abs=1e-4)
        assert isd_closed_form(Dataset([0.0, 0.0]), G1, 1.0) == pytest.approx(0.2820948, abs=1e-7)
        assert isd_closed_form(Dataset([0.0, 1.0]), G1, 1.0) == pytest.approx(0.2508953, abs=1e-7)

    def test_grid_vs_closed_form(self, rng):
        params = MixedNormalParams()
        for _ in range(20):
            data = sample_mixed_normal(params, 100, rng)
            h = rng.uniform(0.05, 0.5)
            exact = isd_closed_form(data, G1, h)
            assert isd_estimate(data, G1, h) == pytest.approx(exact, rel=1e-3)

    def test_univariate_only(self):
        with pytest.raises(NotImplementedError):
            isd_estimate(Dataset(np.zeros((3, 2))), gaussian(2), 1.0)


class TestDWAD:
    def test_values(self):
        data = Dataset([0.0, 1.0], [0.0, 1.0])
        assert dwad_estimate(data, G1, 1.0) == pytest.approx(0.2419707, abs=1e-7)

    def test_zero_cases(self, rng):
        x = rng.normal(size=(10, 2))
        assert dwad_estimate(Dataset(x, np.zeros(10)), gaussian(2), 0.5) == 0.0
        same = Dataset(np.ones((5, 2)), rng.normal(size=5))
        assert dwad_estimate(same, gaussian(2), 0.5) == 0.0

    def test_requires_responses(self):
        with pytest.raises(ValueError):
            dwad_estimate(Dataset([0.0, 1.0]), G1, 1.0)

    def test_component_range(self):
        with pytest.raises(ValueError):
            dwad_estimate(Dataset(np.zeros((3, 2)), np.zeros(3)), gaussian(2), 1.0, component=2)

    @given(seed=st.integers(0, 2**32 - 1), h=st.floats(0.2, 2.0))
    def test_pair_form(self, seed, h):
        rng = np.random.default_rng(seed)
        n, d = 15, 3
        x = rng.normal(size=(n, d))
        y = rng.normal(size=n)
        data = Dataset(x, y)
        k = gaussian(d)
        total = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                g = derivative_eval(k, (x[j] - x[i]) / h)[0] / h ** (d + 1)
                total += g * (y[i] - y[j])
        pair = 2 * total / (n * (n - 1))
        assert dwad_estimate(data, k, h) == pytest.approx(pair, rel=1e-12, abs=1e-15)
        u = dwad_pair_matrix(data, k, h)
        np.testing.assert_allclose(u, u.T, rtol=1e-12, atol=1e-15)

    def test_permutation_invariant(self, rng):
        data = Dataset(rng.normal(size=(30, 3)), rng.normal(size=30))
        perm = data.take(rng.permutation(30))
        k = gaussian(3)
        assert dwad_estimate(perm, k, 0.6, 1) == pytest.approx(dwad_estimate(data, k, 0.6, 1), rel=1e-12)


class TestRecord:
    def test_kind(self):
        assert EstimatorKind("dwad", 2).kind is Kind.DWAD
        with pytest.raises(ValueError):
            EstimatorKind("ad", -1)

    def test_ci_order(self):
        with pytest.raises(ValueError):
            EstimateRecord(0.0, 1.0, EstimatorKind("ad"), ci=(1.0, 0.0))
