import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from semibias.api import (
    AverageDensity,
    DensityWeightedAverageDerivative,
    IntegratedSquaredDensity,
    estimate,
    plugin_variance,
    point_estimate,
    resolve_method,
)
from semibias.bias_correction import Scales, SingularSchemeError
from semibias.estimators import EstimatorKind, Kind, ad_estimate
from semibias.inference import variance_ad
from semibias.kernels import gaussian, twicing
from semibias.smoothing import Dataset

AD = EstimatorKind(Kind.AD)
ISD = EstimatorKind(Kind.ISD)
G1 = gaussian(1)


class TestResolveMethod:
    def test_presets(self):
        assert resolve_method("raw", AD, G1).scheme is None
        m = resolve_method("2sj", AD, G1)
        assert m.scheme.etas == (1.0, 1.25) and m.eta_label == "1;1.25"
        assert resolve_method("5sj", ISD, G1).scheme.size == 5

    def test_msj_inference(self):
        assert resolve_method("msj", ISD, G1).scheme.size == 5
        assert resolve_method("msj", AD, G1).scheme.size == 2
        assert resolve_method("msj", AD, G1, etas=(1, 1.2, 1.4)).scheme.exponents == (2.0, -1.0)
        nl = resolve_method("msj", AD, G1, etas=(1, 1.5), scales=Scales.TWO_SCALE_NONLINEAR)
        assert nl.scheme.exponents == (-1.0,)
        assert resolve_method("msj", AD, G1, etas=(1.0,)).scheme.weights == (1.0,)

    def test_errors(self):
        with pytest.raises(ValueError):
            resolve_method("bogus", AD, G1)
        with pytest.raises(ValueError):
            resolve_method("msj", AD, G1, etas=(1, 2, 3, 4))
        with pytest.raises(SingularSchemeError):
            resolve_method("msj", AD, G1, etas=(1, 1))


class TestEstimate:
    def test_record(self, rng):
        data = Dataset(rng.normal(size=80))
        rec = estimate(AD, data, 0.3, resolve_method("abc", AD, G1))
        assert rec.correction == "abc" and rec.n == 80
        assert rec.theta_hat == pytest.approx(ad_estimate(data, twicing(G1), 0.3), rel=1e-12)
        assert rec.ci[0] <= rec.theta_hat <= rec.ci[1]
        assert rec.variance_hat == pytest.approx(variance_ad(data, twicing(G1), 0.3).sigma_hat)

    def test_skip_inference(self, rng):
        data = Dataset(rng.normal(size=20))
        rec = estimate(AD, data, 0.3, resolve_method("raw", AD, G1), ci_level=None)
        assert rec.variance_hat is None and rec.ci is None

    def test_msj_plugin_uses_combined_kernel(self, rng):
        data = Dataset(rng.normal(size=50))
        m = resolve_method("2sj", AD, G1)
        v = plugin_variance(AD, data, G1, 0.3, m).sigma_hat
        assert v == pytest.approx(variance_ad(data, m.scheme.equivalent_kernel(G1), 0.3).sigma_hat)

    def test_bootstrap(self, rng):
        data = Dataset(rng.normal(size=40))
        m = resolve_method("raw", AD, G1)
        a = estimate(AD, data, 0.4, m, n_boot=20, seed=3)
        b = estimate(AD, data, 0.4, m, n_boot=20, seed=3)
        assert a.variance_hat == b.variance_hat > 0

    def test_isd_bias_fields(self, rng):
        data = Dataset(rng.normal(size=60))
        theta, b_nl, b_anb = point_estimate(ISD, data, G1, 0.2, resolve_method("abc", ISD, G1))
        assert b_nl > 0 and b_anb < 0

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            estimate(AD, Dataset([0.0, 1.0]), 0.0, resolve_method("raw", AD, G1))
        with pytest.raises(ValueError):
            estimate(AD, Dataset([0.0]), 1.0, resolve_method("raw", AD, G1))


class TestSklearnShape:
    def test_params_roundtrip(self):
        est = AverageDensity(bandwidth=0.3, correction="2sj")
        p = est.get_params()
        assert p["bandwidth"] == 0.3 and p["correction"] == "2sj"
        est.set_params(bandwidth=0.4)
        assert clone(est).bandwidth == 0.4

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            AverageDensity().confidence_interval()

    def test_fit_ad(self, rng):
        x = rng.normal(size=100)
        est = AverageDensity(bandwidth=0.3, correction="abc").fit(x)
        assert est.theta_ == pytest.approx(ad_estimate(Dataset(x), twicing(G1), 0.3), rel=1e-12)
        assert est.n_samples_ == 100 and est.n_features_in_ == 1
        lo, hi = est.confidence_interval(0.9)
        assert est.ci_[0] < lo < est.theta_ < hi < est.ci_[1]

    def test_fit_isd(self, rng):
        est = IntegratedSquaredDensity(bandwidth=0.3, correction="5sj", grid_points=800).fit(rng.normal(size=80))
        assert est.theta_ == pytest.approx(1 / (2 * np.sqrt(np.pi)), abs=0.08)
        with pytest.raises(NotImplementedError):
            IntegratedSquaredDensity().fit(rng.normal(size=(10, 2)))

    def test_fit_dwad(self, rng):
        x = rng.normal(size=(200, 3))
        y = x @ np.ones(3) + rng.normal(size=200)
        est = DensityWeightedAverageDerivative(bandwidth=0.4, component=2, correction="2sj").fit(x, y)
        assert est.variance_ > 0
        assert est.theta_ == pytest.approx((4 * np.pi) ** -1.5, abs=0.02)
        with pytest.raises(ValueError):
            DensityWeightedAverageDerivative().fit(x, None)
        with pytest.raises(ValueError):
            DensityWeightedAverageDerivative(component=3).fit(x, y)

    def test_validation(self):
        with pytest.raises(ValueError):
            AverageDensity().fit([[np.nan], [1.0]])
        with pytest.raises(ValueError):
            AverageDensity().fit([1.0])
