"""Marginal model core: means, derivatives, variance weights."""

import numpy as np
import pytest

from qifaux import (
    Link,
    LongitudinalDataset,
    MarginalModelSpec,
    Subject,
    Variance,
    mean_derivative,
    mean_vector,
    variance_inv_sqrt,
)

GAUSS = MarginalModelSpec.gaussian()
BERN = MarginalModelSpec.bernoulli()


class TestMeanVector:
    def test_identity_linear_algebra(self):
        s = Subject(np.zeros(1), np.array([[1.0, 2.0]]))
        mu = mean_vector(GAUSS, s, np.array([0.5, -0.5]))
        assert mu == pytest.approx([-0.5])

    def test_logit_at_zero_predictor(self):
        s = Subject(np.zeros(2), np.zeros((2, 3)))
        mu = mean_vector(BERN, s, np.array([1.0, -2.0, 0.3]))
        np.testing.assert_allclose(mu, 0.5)

    def test_simulation_design_zero_mean_cell(self):
        # x_j1 = 1 and x_2 = 1 with coefficients (0.5, -0.5) gives mean 0
        s = Subject(np.zeros(3), np.column_stack([np.ones(3), np.ones(3)]))
        mu = mean_vector(GAUSS, s, np.array([0.5, -0.5]))
        np.testing.assert_allclose(mu, 0.0)

    def test_logit_range_and_clamping(self):
        s = Subject(np.zeros(2), np.array([[1000.0], [-1000.0]]))
        mu = mean_vector(BERN, s, np.array([1.0]))
        assert np.all(mu > 0) and np.all(mu < 1)
        assert np.all(np.isfinite(mu))


class TestMeanDerivative:
    def test_identity_returns_covariates_verbatim(self):
        rng = np.random.default_rng(0)
        s = Subject(rng.standard_normal(4), rng.standard_normal((4, 2)))
        d = mean_derivative(GAUSS, s, np.array([1.0, 2.0]))
        np.testing.assert_array_equal(d, s.covariates)

    def test_identity_derivative_independent_of_beta(self):
        rng = np.random.default_rng(1)
        s = Subject(rng.standard_normal(3), rng.standard_normal((3, 2)))
        d1 = mean_derivative(GAUSS, s, np.array([0.0, 0.0]))
        d2 = mean_derivative(GAUSS, s, np.array([17.0, -3.0]))
        assert np.array_equal(d1, d2)

    def test_logit_zero_covariates_gives_zero_row(self):
        s = Subject(np.zeros(2), np.zeros((2, 2)))
        d = mean_derivative(BERN, s, np.array([1.0, 1.0]))
        np.testing.assert_array_equal(d, np.zeros((2, 2)))

    def test_logit_quarter_slope_at_origin(self):
        s = Subject(np.zeros(1), np.array([[1.0]]))
        d = mean_derivative(BERN, s, np.array([0.0]))
        np.testing.assert_allclose(d, [[0.25]], atol=1e-14)

    @pytest.mark.parametrize("spec", [GAUSS, BERN])
    def test_matches_central_finite_differences(self, spec):
        rng = np.random.default_rng(2)
        s = Subject(rng.standard_normal(3), rng.standard_normal((3, 2)))
        beta = rng.standard_normal(2) * 0.5
        analytic = mean_derivative(spec, s, beta)
        h = 1e-6
        fd = np.empty_like(analytic)
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            fd[:, j] = (
                mean_vector(spec, s, beta + e) - mean_vector(spec, s, beta - e)
            ) / (2 * h)
        np.testing.assert_allclose(analytic, fd, rtol=1e-6, atol=1e-9)


class TestVarianceInvSqrt:
    def test_constant_variance_identity(self):
        s = Subject(np.zeros(3), np.zeros((3, 1)))
        np.testing.assert_array_equal(
            variance_inv_sqrt(GAUSS, s, np.array([0.0])), np.eye(3)
        )

    def test_bernoulli_half(self):
        s = Subject(np.zeros(1), np.zeros((1, 1)))
        a = variance_inv_sqrt(BERN, s, np.array([3.0]))
        np.testing.assert_allclose(a, [[2.0]])

    def test_bernoulli_point_nine(self):
        # mean 0.9: logit(0.9) as predictor; oracle is plain arithmetic
        s = Subject(np.zeros(1), np.array([[1.0]]))
        beta = np.array([np.log(0.9 / 0.1)])
        a = variance_inv_sqrt(BERN, s, beta)
        np.testing.assert_allclose(a[0, 0], (0.9 * 0.1) ** -0.5, rtol=1e-12)
        np.testing.assert_allclose(a[0, 0], 10.0 / 3.0, rtol=1e-12)

    def test_dispersion_scaling(self):
        rng = np.random.default_rng(3)
        s = Subject(rng.standard_normal(3), rng.standard_normal((3, 2)))
        beta = np.array([0.3, -0.2])
        base = variance_inv_sqrt(
            MarginalModelSpec(Link.LOGIT, Variance.BERNOULLI, 1.0), s, beta
        )
        doubled = variance_inv_sqrt(
            MarginalModelSpec(Link.LOGIT, Variance.BERNOULLI, 2.0), s, beta
        )
        np.testing.assert_allclose(doubled, base / np.sqrt(2.0), rtol=1e-12)


class TestSpecValidation:
    def test_mismatched_pair_rejected(self):
        with pytest.raises(ValueError):
            MarginalModelSpec(Link.IDENTITY, Variance.BERNOULLI)
        with pytest.raises(ValueError):
            MarginalModelSpec(Link.LOGIT, Variance.CONSTANT)

    def test_dispersion_positive(self):
        with pytest.raises(ValueError):
            MarginalModelSpec(dispersion=0.0)


class TestDataset:
    def test_shape_consistency(self):
        with pytest.raises(ValueError):
            LongitudinalDataset(np.zeros((3, 2)), np.zeros((3, 4, 2)))

    def test_finite_entries_required(self):
        y = np.zeros((2, 2))
        x = np.zeros((2, 2, 1))
        x[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            LongitudinalDataset(y, x)

    def test_roundtrip_through_subjects(self):
        rng = np.random.default_rng(4)
        y = rng.standard_normal((5, 3))
        x = rng.standard_normal((5, 3, 2))
        ds = LongitudinalDataset(y, x)
        again = LongitudinalDataset.from_subjects(ds.subjects)
        np.testing.assert_array_equal(again.responses, y)
        np.testing.assert_array_equal(again.covariates, x)
        assert (ds.n, ds.q, ds.p) == (5, 3, 2)
