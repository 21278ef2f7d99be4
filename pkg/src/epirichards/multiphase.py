"""Piecewise Richards means with latent switch days, for resurgence after an
initial wave. Only new cases are modelled."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import errmodel, growth
from .data import EpidemicSeries
from .errors import ConfigError, DomainError
from .growth import GrowthParams
from .mcmc import PosteriorDraws, SamplerConfig, build_phased, mean_matrix, run_chains
from .prior import PriorConfig, exponential_logpdf, gamma_prior_logpdf, lognormal_logpdf


@dataclass(frozen=True)
class PhasePlan:
    """Growth regimes in time order and the days on which each later one
    takes over. ``phases[p].K`` is the final size of phase p; the link
    ``eta_p = K_p / K_{p-1}`` is derived."""

    phases: tuple[GrowthParams, ...]
    kappas: tuple[float, ...] = ()

    def __post_init__(self):
        if not 1 <= len(self.phases) <= 3:
            raise ConfigError("a plan has 1, 2 or 3 phases")
        if len(self.kappas) != len(self.phases) - 1:
            raise ConfigError("need one switch day per extra phase")
        if any(b <= a for a, b in zip(self.kappas, self.kappas[1:])):
            raise ConfigError("switch days must increase")

    @property
    def n_phases(self) -> int:
        return len(self.phases)

    @property
    def etas(self) -> tuple[float, ...]:
        return tuple(b.K / a.K for a, b in zip(self.phases, self.phases[1:]))

    def active(self, t) -> np.ndarray:
        """Index of the phase governing each day ``t``."""
        return np.searchsorted(np.asarray(self.kappas), np.asarray(t, dtype=float),
                               side="right")


def multiphase_mean(plan: PhasePlan, C_prev, t):
    """Expected new cases on day ``t`` given cumulative ``C_prev`` on day t-1.

    Raises DomainError when the previous cumulative has reached the active
    phase's final size (bounded families), which the likelihood treats as
    zero support.
    """
    C_prev = np.asarray(C_prev, dtype=float)
    t = np.asarray(t, dtype=float)
    C_b, t_b = np.broadcast_arrays(C_prev, t)
    if np.any(C_b <= 0):
        raise DomainError("cumulative count must be positive")
    idx = plan.active(t_b)
    out = np.empty(C_b.shape)
    for p, g in enumerate(plan.phases):
        sel = idx == p
        if not sel.any():
            continue
        if g.family in growth.BOUNDED_FAMILIES and np.any(C_b[sel] >= g.K):
            raise DomainError(f"support violation: cumulative >= K of phase {p + 1}")
        out[sel] = growth.incidence(g.family, g.r, g.K, g.a, C_b[sel])
    return out[()] if out.ndim == 0 else out


def plan_from_params(names, values, growth_family="richards") -> PhasePlan:
    """PhasePlan from one row of multiphase sampler parameters."""
    v = dict(zip(names, values))
    n = 1 + sum(1 for k in v if k.startswith("kappa"))
    phases, kappas = [], []
    K = v["K_1"]
    for p in range(1, n + 1):
        if p > 1:
            K = K * v[f"eta_{p}"]
            kappas.append(v[f"kappa_{p - 1}"])
        phases.append(GrowthParams(growth_family, v[f"r_{p}"], K, v[f"a_{p}"]))
    return PhasePlan(tuple(phases), tuple(kappas))


def log_posterior_phased(
    plan: PhasePlan,
    hyper: float,
    latents: errmodel.LatentEffects,
    series: EpidemicSeries,
    prior: PriorConfig,
    family: str = "pls",
    t_max: int | None = None,
    k_log_mean: float | None = None,
    nu: float = 4.0,
) -> float:
    """Cases-only joint log density on the natural scale.

    ``latents.eps`` covers days 2..t_max. Prior terms: exponential on each
    r_p and a_p (Richards), lognormal on K_1, exponential on each eta and
    switch day, gamma on ``hyper``.
    """
    t_max = series.T if t_max is None else t_max
    k_mean = prior.k_log_mean if k_log_mean is None else k_log_mean
    if k_mean is None:
        raise ConfigError("k_log_mean unresolved")
    t = np.arange(2, t_max + 1)
    try:
        mu = multiphase_mean(plan, series.C[t - 2], t)
    except DomainError:
        return -math.inf
    if np.any(mu <= 0):
        return -math.inf
    eps = np.asarray(latents.eps, dtype=float)
    total = float(np.sum(errmodel.log_obs(series.c[t - 1], mu, eps)))
    if family == "pg":
        spec = errmodel.ErrorSpec.pg(hyper)
    else:
        spec = errmodel.ErrorSpec(family, sigma=1.0 / math.sqrt(hyper), nu=nu)
    total += float(np.sum(errmodel.log_effect_prior(spec, eps, latents.mix_scale)))
    shaped = plan.phases[0].family in ("richards", "rosenzweig")
    for g in plan.phases:
        total += float(exponential_logpdf(g.r, prior.rate_prior_mean))
        if shaped:
            total += float(exponential_logpdf(g.a, prior.rate_prior_mean))
    total += float(lognormal_logpdf(plan.phases[0].K, k_mean, prior.k_log_var))
    for eta in plan.etas:
        total += float(exponential_logpdf(eta, prior.eta_mean))
    for kappa in plan.kappas:
        total += float(exponential_logpdf(kappa, prior.kappa_mean))
    total += float(gamma_prior_logpdf(hyper, prior.hyper_shape, prior.hyper_rate))
    return total


def fit_multiphase(
    series: EpidemicSeries,
    n_phases: int = 2,
    prior: PriorConfig | None = None,
    family: str = "pls",
    sampler_cfg: SamplerConfig | None = None,
    t_max: int | None = None,
    growth_family: str = "richards",
    nu: float = 4.0,
    n_jobs: int = 1,
) -> PosteriorDraws:
    """Sample the cases-only model with ``n_phases`` regimes."""
    prior = prior or PriorConfig()
    t_max = series.T if t_max is None else t_max
    if prior.kappa_mean <= 0:
        raise ConfigError("kappa prior mean must be positive")
    model = build_phased(series, n_phases, prior, family, growth_family, nu, t_max)
    return run_chains(model, sampler_cfg, n_jobs=n_jobs)


def posterior_mean_curve(draws: PosteriorDraws) -> dict[str, np.ndarray]:
    """Per-day posterior means of the growth mean and of mu_t * eps_t on the
    fitted days (plot-ready smoothed curve)."""
    m = draws.model
    n = m.nobs[0]
    par = draws.flat_par()
    mu = mean_matrix(m, par, 0, m.cprev[0, :n], m.day[0, :n])
    u = draws.u.reshape(-1, m.n_out, draws.u.shape[-1])[:, 0, :n]
    return {
        "day": m.day[0, :n].astype(int),
        "observed": m.y[0, :n],
        "mu_mean": mu.mean(axis=0),
        "rate_mean": (mu * np.exp(u)).mean(axis=0),
    }
