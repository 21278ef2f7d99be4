"""Bayesian Richards-curve models for epidemic case and death counts with
overdispersed Poisson errors, forecasting, switch-point extensions and
effective reproduction ratios."""

__version__ = "0.1.0"

from .data import EpidemicSeries, load_series, parse_csv, build_series  # noqa: E402
from .errmodel import ErrorSpec, LatentEffects  # noqa: E402
from .growth import GrowthParams  # noqa: E402
from .prior import PriorConfig, ThetaBivariate  # noqa: E402
from .mcmc import (  # noqa: E402
    PosteriorDraws,
    SamplerConfig,
    build_bivariate,
    build_phased,
    gelman_rubin,
    log_posterior,
    run_chains,
    summarize,
    waic,
)
from .forecast import crossval, predict_paths  # noqa: E402
from .multiphase import PhasePlan, fit_multiphase, multiphase_mean  # noqa: E402
from .rtestim import discretize_si, effective_r, gamma_from_mean_sd  # noqa: E402
from .simulate import DeathLink, SimSpec, simulate_epidemic  # noqa: E402

__all__ = [
    "EpidemicSeries", "load_series", "parse_csv", "build_series", "ErrorSpec",
    "LatentEffects", "GrowthParams", "PriorConfig", "ThetaBivariate", "PosteriorDraws",
    "SamplerConfig", "build_bivariate", "build_phased", "gelman_rubin", "log_posterior",
    "run_chains", "summarize", "waic", "crossval", "predict_paths", "PhasePlan",
    "fit_multiphase", "multiphase_mean", "discretize_si", "effective_r",
    "gamma_from_mean_sd", "DeathLink", "SimSpec", "simulate_epidemic",
]
