"""Forward models: compartmental drug model, linear-Gaussian, synthetic."""

import math

import numpy as np
import pytest

from nestiq.models import (
    ForwardModel,
    LinearGaussianModel,
    PKModel,
    SyntheticDiscretizedModel,
    linear_gaussian_forward,
    pk_designs,
    pk_forward,
    pk_prior,
    synthetic_discretized_forward,
)


class TestPkForward:
    def test_reference_point(self):
        # 20 * (1/0.9) * (e^-0.1 - e^-1), re-keyed by hand
        out = pk_forward(np.array([1.0, 0.1, 20.0]), np.array([1.0]))
        assert out[0] == pytest.approx(11.93239948587816, rel=1e-12)

    def test_equal_rates_limit(self):
        out = pk_forward(np.array([0.5, 0.5, 20.0]), np.array([2.0]))
        assert out[0] == pytest.approx(20.0 * 0.5 * 2.0 * math.exp(-1.0), rel=1e-9)
        # continuity against a nearby regular evaluation
        near = pk_forward(np.array([0.5, 0.5 + 1e-9, 20.0]), np.array([2.0]))
        assert out[0] == pytest.approx(near[0], rel=1e-6)

    def test_vanishes_at_time_zero(self):
        out = pk_forward(np.array([1.0, 0.1, 20.0]), np.array([1e-14]))
        assert abs(out[0]) < 1e-10

    def test_positive_parameters_required(self):
        with pytest.raises(ValueError):
            pk_forward(np.array([-1.0, 0.1, 20.0]), np.array([1.0]))

    def test_jacobian_matches_central_differences(self):
        model = PKModel()
        prior = pk_prior()
        rng = np.random.default_rng(1)
        theta = prior.transform(rng.uniform(0.05, 0.95, size=(50, 3)))
        xi = pk_designs()[0]
        analytic = model.jacobian(theta, xi)
        fd = ForwardModel.jacobian(model, theta, xi)
        rel = np.abs(analytic - fd) / (np.abs(fd) + 1e-10)
        assert rel.max() < 1e-6

    def test_jacobian_near_equal_rates(self):
        model = PKModel()
        theta = np.array([[0.5, 0.5 * (1 + 1e-12), 20.0]])
        xi = np.array([1.0, 2.0])
        jac = model.jacobian(theta, xi)
        assert np.all(np.isfinite(jac))
        # limit formulas against a separation where the general quotient is
        # still numerically clean
        jac_near = model.jacobian(np.array([[0.5, 0.5 + 1e-5, 20.0]]), xi)
        np.testing.assert_allclose(jac, jac_near, rtol=1e-4, atol=1e-6)


class TestPkDesigns:
    def test_first_entries(self):
        geom, even = pk_designs()
        assert geom[0] == pytest.approx(0.94)
        assert even[0] == pytest.approx(0.3)

    def test_last_entries(self):
        geom, even = pk_designs()
        assert even[14] == pytest.approx(0.3 + 1.6 * 14)
        assert geom[14] == pytest.approx(0.94 * 1.25**14)
        assert geom[14] < 24.0  # all samples inside the 24 h window

    def test_lengths(self):
        geom, even = pk_designs()
        assert len(geom) == len(even) == 15


class TestPkPrior:
    def test_medians(self):
        prior = pk_prior()
        med = prior.median()
        np.testing.assert_allclose(med, [1.0, 0.1, 20.0])

    def test_samples_positive(self):
        prior = pk_prior()
        rng = np.random.default_rng(2)
        th = prior.transform(rng.uniform(0.001, 0.999, size=(2000, 3)))
        assert np.all(th > 0)

    def test_scale_readings(self):
        assert pk_prior("variance").components[0].b == pytest.approx(math.sqrt(0.05))
        assert pk_prior("stddev").components[0].b == pytest.approx(0.05)
        with pytest.raises(ValueError):
            pk_prior("guess")


class TestLinearGaussian:
    def test_identity(self):
        out = linear_gaussian_forward(np.array([1.0, 2.0]), np.eye(2))
        np.testing.assert_allclose(out, [1.0, 2.0])

    def test_zero_map(self):
        out = linear_gaussian_forward(np.array([1.0, 2.0]), np.zeros((2, 2)))
        np.testing.assert_allclose(out, [0.0, 0.0])

    def test_jacobian_is_matrix(self):
        model = LinearGaussianModel(matrix=[[2.0, 1.0]])
        jac = model.jacobian(np.array([[0.3, 0.4]]))
        np.testing.assert_allclose(jac[0], [[2.0, 1.0]])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            linear_gaussian_forward(np.array([1.0]), np.eye(2))


class TestSyntheticModel:
    def test_level_zero_limit(self):
        model = SyntheticDiscretizedModel()
        theta = np.array([[0.4]])
        xi = np.array([0.5, 1.0])
        base = model.evaluate(theta, xi, h=None)
        fine = model.evaluate(theta, xi, h=1e-6)
        np.testing.assert_allclose(fine, base, atol=1e-11)

    def test_halving_h_quarters_the_perturbation(self):
        model = SyntheticDiscretizedModel(eta=2.0)
        theta = np.array([[0.4]])
        xi = np.array([0.5, 1.0])
        base = model.evaluate(theta, xi, h=None)
        d1 = model.evaluate(theta, xi, h=0.4) - base
        d2 = model.evaluate(theta, xi, h=0.2) - base
        np.testing.assert_allclose(d1, 4.0 * d2, rtol=1e-12)

    def test_work_counter(self):
        model = SyntheticDiscretizedModel(gamma=2.0)
        model.evaluate(np.array([[0.4]]), np.array([0.5]), h=0.25)
        assert model.work == pytest.approx(16.0)

    def test_invalid_level(self):
        model = SyntheticDiscretizedModel()
        with pytest.raises(ValueError):
            synthetic_discretized_forward(np.array([0.4]), np.array([0.5]), 0.0, model)

    def test_jacobian_matches_central_differences(self):
        model = SyntheticDiscretizedModel(d_theta=2)
        rng = np.random.default_rng(3)
        theta = rng.uniform(0.1, 0.9, size=(20, 2))
        xi = np.array([0.5, 1.0])
        analytic = model.jacobian(theta, xi, h=0.3)
        fd = ForwardModel.jacobian(model, theta, xi, h=0.3)
        np.testing.assert_allclose(analytic, fd, rtol=1e-5, atol=1e-7)


class TestDiscretizationBiasVisibility:
    """The level-h perturbation must surface as an eta-rate bias in the
    information-gain estimate."""

    def _problem(self, model, h):
        from nestiq.oed import OEDProblem
        from nestiq.stats import PriorSpec

        return OEDProblem(
            model=model,
            xi=np.array([0.5, 1.0]),
            prior=PriorSpec(components=(("uniform", 0.0, 1.0),)),
            noise_variances=[0.25, 0.25],
            h=h,
        )

    def test_quadrature_bias_slope_matches_eta(self):
        from nestiq.oed import eig_quadrature

        model = SyntheticDiscretizedModel(d_theta=1, c_disc=1.0, eta=2.0, gamma=2.0)
        ref = eig_quadrature(self._problem(model, None), 24, 24, 48)
        hs = [0.4, 0.2, 0.1]
        biases = [abs(eig_quadrature(self._problem(model, h), 24, 24, 48) - ref)
                  for h in hs]
        slope = np.polyfit(np.log2(hs), np.log2(biases), 1)[0]
        assert slope == pytest.approx(model.eta, abs=0.3)

    def test_estimator_bias_slope_matches_eta(self):
        # common randomization across levels cancels the statistical error,
        # leaving the deterministic level bias
        from nestiq.lds import RandomizationKey
        from nestiq.oed import eig_nested

        model = SyntheticDiscretizedModel(d_theta=1, c_disc=1.0, eta=2.0, gamma=2.0)
        key = RandomizationKey(9, tag="disc")
        base = eig_nested(self._problem(model, 1e-5), 2**10, 2**6, S=4, R=1, key=key)
        hs = [0.4, 0.2, 0.1]
        biases = [
            abs(eig_nested(self._problem(model, h), 2**10, 2**6, S=4, R=1,
                           key=key).estimate - base.estimate)
            for h in hs
        ]
        slope = np.polyfit(np.log2(hs), np.log2(biases), 1)[0]
        assert slope == pytest.approx(model.eta, abs=0.3)
