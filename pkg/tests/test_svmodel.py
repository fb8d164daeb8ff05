"""Model parameterizations, posterior value, gradient, and fit plumbing."""

import math

import numpy as np
import pytest
import scipy.stats

from svhmc import dist, hmc, svmodel


def simulate_series(rng, n, mu=-9.0, phi=0.95, sigma=0.15):
    h = np.empty(n)
    h[0] = mu + sigma / math.sqrt(1 - phi * phi) * rng.standard_normal()
    for t in range(1, n):
        h[t] = mu + phi * (h[t - 1] - mu) + sigma * rng.standard_normal()
    return np.exp(h / 2) * rng.standard_normal(n), h


def all_specs():
    priors = [
        dist.PriorConfig(),
        dist.PriorConfig(sigma2_prior=dist.InvGammaSigmaPrior(2.5, 0.025)),
        dist.PriorConfig(sigma2_prior=dist.ScaledInvChiSqPrior(10.0, 0.05)),
    ]
    return [
        svmodel.ModelSpec(family, priors=p)
        for family in dist.FAMILIES
        for p in priors
    ]


class TestTransforms:
    def test_zero_innovations_flat_path(self):
        h = svmodel.latent_path(-9.0, 0.95, 0.15, np.zeros(50))
        assert np.allclose(h, -9.0, atol=1e-14)

    def test_unconstrained_zero_maps_to_center(self):
        spec = svmodel.ModelSpec("gaussian")
        z = svmodel.UnconstrainedState(z_mu=0.0, z_phi=0.0, z_sigma=0.0, z_h=np.zeros(4))
        theta = svmodel.to_constrained(spec, z)
        assert theta.mu == 0.0
        assert theta.phi == 0.0
        assert theta.sigma_eta == 1.0
        assert np.allclose(theta.h, 0.0)

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        for family in dist.FAMILIES:
            spec = svmodel.ModelSpec(family)
            nu = {"gaussian": None, "ged": 1.7, "student-t": 6.0, "skew-normal": -1.2}[family]
            theta = svmodel.ParamState(
                mu=-8.5, phi=0.93, sigma_eta=0.21,
                h=-8.5 + 0.4 * rng.standard_normal(30), nu=nu,
            )
            z = svmodel.to_unconstrained(spec, theta)
            back = svmodel.to_constrained(spec, z)
            assert back.mu == pytest.approx(theta.mu, abs=1e-12)
            assert back.phi == pytest.approx(theta.phi, abs=1e-12)
            assert back.sigma_eta == pytest.approx(theta.sigma_eta, rel=1e-12)
            assert np.allclose(back.h, theta.h, atol=1e-10)
            if spec.has_shape:
                assert back.nu == pytest.approx(theta.nu, rel=1e-12)

    def test_vector_round_trip(self):
        rng = np.random.default_rng(1)
        vec = rng.standard_normal(14)
        z = svmodel.UnconstrainedState.from_vector(vec, has_shape=True)
        assert np.array_equal(z.to_vector(), vec)
        z2 = svmodel.UnconstrainedState.from_vector(vec, has_shape=False)
        assert z2.z_nu is None
        assert z2.z_h.size == 11

    def test_stationary_moments(self):
        rng = np.random.default_rng(2)
        h = svmodel.latent_path(-9.0, 0.95, 0.15, rng.standard_normal(100_000))
        target_var = 0.15**2 / (1 - 0.95**2)
        assert abs(h.var() - target_var) / target_var <= 0.05
        lag1 = np.corrcoef(h[:-1], h[1:])[0, 1]
        assert abs(lag1 - 0.95) <= 0.01

    def test_param_state_validation(self):
        with pytest.raises(ValueError):
            svmodel.ParamState(mu=0.0, phi=1.0, sigma_eta=0.1, h=np.zeros(3))
        with pytest.raises(ValueError):
            svmodel.ParamState(mu=0.0, phi=0.5, sigma_eta=0.0, h=np.zeros(3))
        with pytest.raises(ValueError):
            svmodel.ParamState(mu=0.0, phi=0.5, sigma_eta=0.1, h=np.array([np.nan, 0.0]))

    def test_unknown_family_rejected(self):
        with pytest.raises(ValueError):
            svmodel.ModelSpec("cauchy")


class TestLogPosterior:
    def test_two_point_hand_oracle(self):
        # z = 0 means mu=0, phi=0, sigma=1, h=(0,0); every term is available
        # in closed form through scipy.stats
        spec = svmodel.ModelSpec("gaussian")
        y = np.zeros(2)
        z = svmodel.UnconstrainedState(z_mu=0.0, z_phi=0.0, z_sigma=0.0, z_h=np.zeros(2))
        val, grad = svmodel.log_posterior(spec, z, y)

        obs = 2 * scipy.stats.norm.logpdf(0.0)
        innov = 2 * scipy.stats.norm.logpdf(0.0)
        p_mu = scipy.stats.norm.logpdf(0.0, loc=-10.0, scale=1.0)
        p_phi = scipy.stats.beta.logpdf(0.5, 20.0, 1.5) + math.log(0.5)
        jac_phi = math.log(1.0 - 0.0**2)
        p_sig = scipy.stats.gamma.logpdf(1.0, 0.5, scale=0.2)
        jac_sig = math.log(2.0) + 2.0 * 0.0
        expected = obs + innov + p_mu + p_phi + jac_phi + p_sig + jac_sig
        assert val == pytest.approx(expected, rel=1e-12)
        assert grad.shape == (5,)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        y, _ = simulate_series(rng, 50)
        for spec in all_specs():
            target = svmodel.make_target(spec, y)
            z0 = svmodel.initial_point(spec, y) + 0.3 * rng.standard_normal(
                y.size + spec.n_scalar_params
            )
            val, grad = target(z0)
            assert np.isfinite(val)
            idx = list(range(spec.n_scalar_params)) + [
                spec.n_scalar_params, spec.n_scalar_params + 24, y.size + spec.n_scalar_params - 1
            ]
            for j in idx:
                step = 1e-6 * max(1.0, abs(z0[j]))
                zp, zm = z0.copy(), z0.copy()
                zp[j] += step
                zm[j] -= step
                fd = (target(zp)[0] - target(zm)[0]) / (2 * step)
                assert grad[j] == pytest.approx(fd, rel=2e-5, abs=1e-6), (
                    spec.family, type(spec.priors.sigma2_prior).__name__, j
                )

    def test_out_of_support_is_minus_inf(self):
        spec = svmodel.ModelSpec("gaussian")
        y = np.array([0.1, -0.2, 0.05])
        target = svmodel.make_target(spec, y)
        z = svmodel.initial_point(spec, y)
        z[2] = 1000.0  # sigma overflows to inf
        val, grad = target(z)
        assert val == -np.inf
        assert np.all(grad == 0.0)

    def test_latent_dimension_checked(self):
        spec = svmodel.ModelSpec("gaussian")
        z = svmodel.UnconstrainedState(z_mu=0.0, z_phi=0.0, z_sigma=0.0, z_h=np.zeros(3))
        with pytest.raises(ValueError):
            svmodel.log_posterior(spec, z, np.zeros(5))

    def test_series_validation(self):
        spec = svmodel.ModelSpec("gaussian")
        with pytest.raises(ValueError):
            svmodel.make_target(spec, np.array([1.0]))
        with pytest.raises(ValueError):
            svmodel.make_target(spec, np.array([1.0, np.nan]))
        with pytest.raises(ValueError):
            svmodel.make_target(spec, np.ones((3, 2)))

    def test_obs_mask_shape_checked(self):
        spec = svmodel.ModelSpec("gaussian")
        y = np.array([0.1, -0.2, 0.05])
        with pytest.raises(ValueError):
            svmodel.make_target(spec, y, obs_mask=np.ones(4, dtype=bool))

    def test_ged_two_matches_gaussian_likelihood(self):
        # nu=2 reduces the heavier-tailed family to the normal; the
        # observation terms must agree even though the priors differ
        rng = np.random.default_rng(4)
        y, _ = simulate_series(rng, 40)
        spec_g = svmodel.ModelSpec("gaussian")
        spec_e = svmodel.ModelSpec("ged")
        none_mask = np.zeros(y.size, dtype=bool)
        z = svmodel.initial_point(spec_g, y) + 0.2 * rng.standard_normal(y.size + 3)
        z_e = np.insert(z, 3, math.log(2.0))
        obs_g = (
            svmodel.make_target(spec_g, y)(z)[0]
            - svmodel.make_target(spec_g, y, obs_mask=none_mask)(z)[0]
        )
        obs_e = (
            svmodel.make_target(spec_e, y)(z_e)[0]
            - svmodel.make_target(spec_e, y, obs_mask=none_mask)(z_e)[0]
        )
        assert obs_e == pytest.approx(obs_g, abs=1e-10)


class TestPointwise:
    def test_hand_values(self):
        spec = svmodel.ModelSpec("gaussian")
        theta = svmodel.ParamState(mu=0.0, phi=0.0, sigma_eta=1.0, h=np.array([0.0, 2.0]))
        lp = svmodel.pointwise_loglik(spec, theta, np.array([0.0, 1.0]))
        assert lp[0] == pytest.approx(-0.5 * math.log(2 * math.pi), rel=1e-14)
        expected = -0.5 * math.log(2 * math.pi) - 0.5 * math.exp(-2.0) - 1.0
        assert lp[1] == pytest.approx(expected, rel=1e-14)

    def test_scale_shift_property(self):
        # doubling y and raising h by 2*log(2) leaves the standardized
        # residual alone, so each term drops by exactly log(2)
        rng = np.random.default_rng(5)
        y, h = simulate_series(rng, 30)
        spec = svmodel.ModelSpec("student-t")
        theta = svmodel.ParamState(mu=-9.0, phi=0.9, sigma_eta=0.2, h=h, nu=6.0)
        theta2 = svmodel.ParamState(
            mu=-9.0, phi=0.9, sigma_eta=0.2, h=h + 2 * math.log(2.0), nu=6.0
        )
        lp1 = svmodel.pointwise_loglik(spec, theta, y)
        lp2 = svmodel.pointwise_loglik(spec, theta2, 2 * y)
        assert np.allclose(lp2, lp1 - math.log(2.0), atol=1e-12)

    def test_sum_matches_posterior_observation_term(self):
        rng = np.random.default_rng(6)
        y, _ = simulate_series(rng, 25)
        for family in dist.FAMILIES:
            spec = svmodel.ModelSpec(family)
            z_vec = svmodel.initial_point(spec, y) + 0.2 * rng.standard_normal(
                y.size + spec.n_scalar_params
            )
            z = svmodel.UnconstrainedState.from_vector(z_vec, spec.has_shape)
            theta = svmodel.to_constrained(spec, z)
            total = svmodel.pointwise_loglik(spec, theta, y).sum()
            none_mask = np.zeros(y.size, dtype=bool)
            obs = (
                svmodel.make_target(spec, y)(z_vec)[0]
                - svmodel.make_target(spec, y, obs_mask=none_mask)(z_vec)[0]
            )
            assert obs == pytest.approx(total, abs=1e-10)

    def test_shape_parameter_required(self):
        spec = svmodel.ModelSpec("ged")
        theta = svmodel.ParamState(mu=0.0, phi=0.5, sigma_eta=0.1, h=np.zeros(3))
        with pytest.raises(ValueError):
            svmodel.pointwise_loglik(spec, theta, np.zeros(3))


class TestFit:
    def test_smoke_and_summaries(self):
        rng = np.random.default_rng(7)
        y, _ = simulate_series(rng, 100)
        spec = svmodel.ModelSpec("gaussian")
        cfg = hmc.SamplerConfig(warmup=200, draws=150, chains=2, seed=1)
        fit = svmodel.fit(spec, y, cfg)
        assert fit.store.draws.shape == (2, 150, 103)

        s = fit.scalar_summaries()
        assert set(s) == {"mu", "phi", "sigma_eta"}
        for stats in s.values():
            assert stats["ci_2.5"] <= stats["mean"] <= stats["ci_97.5"]

        mean_state = fit.posterior_mean_state()
        assert mean_state.h.shape == (100,)
        assert -12.0 < mean_state.mu < -6.0

        ll = fit.loglik_matrix()
        assert ll.shape == (300, 100)
        theta0 = svmodel.to_constrained(
            spec, svmodel.UnconstrainedState.from_vector(fit.store.draws[0, 0], False)
        )
        assert np.allclose(ll[0], svmodel.pointwise_loglik(spec, theta0, y), atol=1e-12)

        mean, lo, hi = fit.volatility_band(0.9)
        assert mean.shape == lo.shape == hi.shape == (100,)
        assert np.all(lo <= hi)
        assert np.all(lo > 0.0)

        diag = fit.diagnostics()
        assert set(diag["rhat"]) == {"mu", "phi", "sigma_eta"}
        assert 0.0 <= diag["divergence_rate"] <= 1.0

    def test_fit_deterministic(self):
        rng = np.random.default_rng(8)
        y, _ = simulate_series(rng, 60)
        spec = svmodel.ModelSpec("gaussian")
        cfg = hmc.SamplerConfig(warmup=150, draws=50, chains=2, seed=9)
        f1 = svmodel.fit(spec, y, cfg)
        f2 = svmodel.fit(spec, y, cfg)
        assert f1.store.draws.tobytes() == f2.store.draws.tobytes()

    def test_initial_point_finite_all_families(self):
        rng = np.random.default_rng(9)
        y, _ = simulate_series(rng, 30)
        for family in dist.FAMILIES:
            spec = svmodel.ModelSpec(family)
            target = svmodel.make_target(spec, y)
            val, grad = target(svmodel.initial_point(spec, y))
            assert np.isfinite(val)
            assert np.all(np.isfinite(grad))

    def test_shape_family_fit_has_nu(self):
        rng = np.random.default_rng(10)
        y, _ = simulate_series(rng, 60)
        spec = svmodel.ModelSpec("student-t")
        cfg = hmc.SamplerConfig(warmup=150, draws=50, chains=1, seed=2)
        fit = svmodel.fit(spec, y, cfg)
        assert "nu" in fit.scalar_summaries()
        assert np.all(fit.constrained["nu"] > 4.0)
