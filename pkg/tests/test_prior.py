import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from epirichards.errors import ConfigError, DegenerateGeometryError
from epirichards.prior import (
    BetaPrior,
    PriorConfig,
    ThetaBivariate,
    beta_logpdf,
    cfr_beta_prior,
    exponential_logpdf,
    gamma_prior_logpdf,
    k_prior_from_series,
    log_prior,
    lognormal_logpdf,
    resolve_k_log_mean,
)

from conftest import logistic_cumulative

THETA = ThetaBivariate(r_c=0.3, a_c=0.8, K_c=2.5e5, r_d=0.2, a_d=1.4, Phi=0.12,
                       hyper_c=7.0, hyper_d=3.0)


def component_oracle(theta, cfg, k_mean):
    b = stats.beta(cfg.cfr_count * cfg.cfr_ref, cfg.cfr_count * (1 - cfg.cfr_ref))
    expo = stats.expon(scale=cfg.rate_prior_mean)
    hyp = stats.gamma(cfg.hyper_shape, scale=1 / cfg.hyper_rate)
    return (
        sum(expo.logpdf(v) for v in (theta.r_c, theta.a_c, theta.r_d, theta.a_d))
        + stats.lognorm.logpdf(theta.K_c, math.sqrt(cfg.k_log_var), scale=math.exp(k_mean))
        + b.logpdf(theta.Phi)
        + hyp.logpdf(theta.hyper_c) + hyp.logpdf(theta.hyper_d)
    )


class TestKPrior:
    def test_upper_percentile(self):
        p = k_prior_from_series(logistic_cumulative(2.5e5, 0.2, 50.0, np.arange(1, 121)), 120, 40)
        q = p.quantile(0.975)
        assert 1.7e6 <= q <= 1.8e6
        # mpmath: 250000 * exp(1.959963984540054)
        np.testing.assert_allclose(q, 1774767.84605783375, rtol=1e-6)

    def test_exact_logistic(self):
        C = logistic_cumulative(1000.0, 0.2, 50.0, np.arange(1, 61))
        np.testing.assert_allclose(k_prior_from_series(C, 60, 10).log_mean, math.log(1000.0),
                                   atol=1e-8)

    def test_flat_series(self):
        with pytest.raises(DegenerateGeometryError):
            k_prior_from_series(np.full(40, 7.0), 40)

    def test_resolve_sources(self):
        C = logistic_cumulative(1000.0, 0.2, 50.0, np.arange(1, 61))
        assert resolve_k_log_mean(PriorConfig(k_log_mean=3.0), C, 60) == (3.0, "user")
        assert resolve_k_log_mean(PriorConfig(), C, 60)[1] == "three-point"
        val, src = resolve_k_log_mean(PriorConfig(), np.full(60, 9.0), 60)
        assert src == "fallback-2C" and val == math.log(18.0)


class TestCfrBetaPrior:
    def test_reference_values(self):
        b = cfr_beta_prior(0.101, 5.0)
        np.testing.assert_allclose([b.alpha, b.beta], [0.505, 4.495], rtol=1e-14)
        np.testing.assert_allclose(b.mean, 0.101, rtol=1e-14)

    def test_uniform(self):
        assert cfr_beta_prior(0.5, 2.0) == BetaPrior(1.0, 1.0)

    def test_out_of_range(self):
        with pytest.raises(ConfigError):
            cfr_beta_prior(1.0, 5.0)
        with pytest.raises(ConfigError):
            cfr_beta_prior(0.1, 0.0)

    @given(st.floats(1e-6, 1 - 1e-6), st.floats(1e-3, 1e4))
    def test_mean_equals_reference(self, phi, count):
        np.testing.assert_allclose(cfr_beta_prior(phi, count).mean, phi, rtol=1e-12)


class TestLogPrior:
    def test_exponential_at_mean(self):
        np.testing.assert_allclose(exponential_logpdf(1.0, 1.0), -1.0)

    def test_phi_boundary(self):
        theta = ThetaBivariate(**{**THETA.__dict__, "Phi": 0.0})
        total, reason = log_prior(theta, PriorConfig(), k_log_mean=12.0, return_reason=True)
        assert total == -math.inf and "Phi" in reason

    def test_component_oracle(self):
        cfg = PriorConfig()
        np.testing.assert_allclose(log_prior(THETA, cfg, k_log_mean=12.4),
                                   component_oracle(THETA, cfg, 12.4), rtol=1e-12)

    def test_additive_blocks(self):
        cfg = PriorConfig()
        rich = log_prior(THETA, cfg, growth_family="richards", k_log_mean=12.0)
        logi = log_prior(THETA, cfg, growth_family="logistic", k_log_mean=12.0)
        shape_block = exponential_logpdf(THETA.a_c, 1.0) + exponential_logpdf(THETA.a_d, 1.0)
        np.testing.assert_allclose(rich - logi, shape_block, rtol=1e-12)

    def test_lognormal_link(self):
        cfg = PriorConfig(k_link="lognormal")
        theta = ThetaBivariate(**{**THETA.__dict__, "Phi": 3e4, "k_link": "lognormal"})
        phi_cfg = PriorConfig()
        diff = log_prior(theta, cfg, k_log_mean=12.0) - log_prior(THETA, phi_cfg, k_log_mean=12.0)
        expect = (lognormal_logpdf(3e4, 12.0 + math.log(0.101), 1.0)
                  - beta_logpdf(THETA.Phi, 0.505, 4.495))
        np.testing.assert_allclose(diff, expect, rtol=1e-12)
        assert theta.K_d == 3e4

    def test_unresolved_k(self):
        with pytest.raises(ConfigError):
            log_prior(THETA, PriorConfig())

    @given(st.floats(1e-6, 0.999999), st.floats(1.0, 1e8))
    def test_kd_below_kc(self, phi, kc):
        theta = ThetaBivariate(**{**THETA.__dict__, "Phi": phi, "K_c": kc})
        assert theta.K_d < theta.K_c

    def test_density_helpers(self):
        x = np.array([0.2, 1.0, 7.0])
        np.testing.assert_allclose(gamma_prior_logpdf(x, 1.0, 0.001),
                                   stats.gamma.logpdf(x, 1.0, scale=1000.0), rtol=1e-12)
        np.testing.assert_allclose(lognormal_logpdf(x, 0.3, 2.0),
                                   stats.lognorm.logpdf(x, math.sqrt(2.0), scale=math.exp(0.3)),
                                   rtol=1e-12)
        assert lognormal_logpdf(-1.0, 0.0, 1.0) == -np.inf


class TestPriorConfig:
    def test_ini_roundtrip(self):
        cfg = PriorConfig(cfr_ref=0.2, k_log_mean=11.5, k_day=90)
        assert PriorConfig.from_ini(cfg.to_ini()) == cfg

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            PriorConfig.from_mapping({"nonsense": "1"})

    def test_validation(self):
        with pytest.raises(ConfigError):
            PriorConfig(cfr_ref=1.5)
        with pytest.raises(ConfigError):
            PriorConfig(hyper_rate=0.0)
