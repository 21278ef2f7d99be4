"""Overdispersion on top of the Poisson: multiplicative effect densities,
conditional observation density, the negative binomial marginal, and the
Student scale-mixture update."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import ConfigError, DomainError

FAMILY_CODES = {"pg": 0, "pln": 1, "pls": 2}
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ErrorSpec:
    """One of Poisson-gamma (``lam``), Poisson-lognormal (``sigma``) or
    Poisson-log-Student (``sigma``, ``nu``)."""

    family: str
    lam: float | None = None
    sigma: float | None = None
    nu: float = 4.0

    def __post_init__(self):
        if self.family not in FAMILY_CODES:
            raise ConfigError(f"unknown error family {self.family!r}")
        if self.family == "pg":
            if self.lam is not None and not self.lam > 0:
                raise DomainError("lambda must be positive")
        elif self.sigma is not None and not self.sigma > 0:
            raise DomainError("sigma must be positive")
        if self.family == "pls" and not self.nu > 2:
            raise DomainError("nu must exceed 2")

    @property
    def code(self) -> int:
        return FAMILY_CODES[self.family]

    @classmethod
    def pg(cls, lam):
        return cls("pg", lam=lam)

    @classmethod
    def pln(cls, sigma):
        return cls("pln", sigma=sigma)

    @classmethod
    def pls(cls, sigma, nu=4.0):
        return cls("pls", sigma=sigma, nu=nu)


@dataclass
class LatentEffects:
    """Per-day multiplicative effects and, for PLS, the precision multipliers."""

    eps: np.ndarray
    mix_scale: np.ndarray | None = None

    @property
    def u(self):
        return np.log(self.eps)


def gamma_logpdf(x, shape, rate):
    """log of rate^shape / Gamma(shape) x^(shape-1) exp(-rate x)."""
    x = np.asarray(x, dtype=float)
    return shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * np.log(x) - rate * x


def normal_logpdf(x, var):
    x = np.asarray(x, dtype=float)
    return -0.5 * (_LOG_2PI + np.log(var)) - 0.5 * x * x / var


def log_effect_prior(spec: ErrorSpec, eps_t, mix_scale_t=None):
    """Log density of the effect(s) on the natural (eps) scale."""
    eps_t = np.asarray(eps_t, dtype=float)
    if np.any(eps_t <= 0):
        raise DomainError("effects must be positive")
    if (mix_scale_t is not None) != (spec.family == "pls"):
        raise ConfigError("mix_scale must be given exactly when the family is pls")
    if spec.family == "pg":
        return gamma_logpdf(eps_t, spec.lam, spec.lam)
    u = np.log(eps_t)
    var = spec.sigma**2
    if spec.family == "pln":
        return normal_logpdf(u, var) - u
    w = np.asarray(mix_scale_t, dtype=float)
    if np.any(w <= 0):
        raise DomainError("mix_scale must be positive")
    return normal_logpdf(u, var / w) - u + gamma_logpdf(w, spec.nu / 2.0, spec.nu / 2.0)


def poisson_logpmf(count, rate):
    count = np.asarray(count, dtype=float)
    rate = np.asarray(rate, dtype=float)
    return count * np.log(rate) - rate - gammaln(count + 1.0)


def log_obs(count, mu_det, eps_t):
    """Poisson log-pmf of ``count`` at rate ``mu_det * eps_t``."""
    rate = np.asarray(mu_det, dtype=float) * np.asarray(eps_t, dtype=float)
    if np.any(rate <= 0):
        raise DomainError("Poisson rate must be positive")
    return poisson_logpmf(count, rate)


def nb_marginal_logpmf(count, mu, lam):
    """Negative binomial with mean ``mu`` and variance mu + mu^2/lam."""
    count = np.asarray(count, dtype=float)
    mu = np.asarray(mu, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(mu <= 0) or np.any(lam <= 0):
        raise DomainError("mu and lambda must be positive")
    return (
        gammaln(count + lam)
        - gammaln(lam)
        - gammaln(count + 1.0)
        + lam * (np.log(lam) - np.log(lam + mu))
        + count * (np.log(mu) - np.log(lam + mu))
    )


def update_student_mix_scale(u_t, sigma_eps, nu, rng: np.random.Generator):
    """Draw the normal-mixture precision multiplier from its full conditional
    Gamma((nu+1)/2, (nu + u^2/sigma^2)/2)."""
    u_t = np.asarray(u_t, dtype=float)
    rate = 0.5 * (nu + u_t * u_t / (sigma_eps * sigma_eps))
    return rng.gamma(0.5 * (nu + 1.0), 1.0 / rate)


def draw_effects(spec_code: int, hyper, nu, size, rng: np.random.Generator):
    """Fresh log-effects u = log(eps) for each row of ``hyper``.

    ``hyper`` is lambda for PG and the precision 1/sigma^2 otherwise;
    broadcasting follows ``size``.
    """
    hyper = np.asarray(hyper, dtype=float)
    if spec_code == 0:
        return np.log(rng.gamma(hyper, 1.0 / hyper, size=size))
    z = rng.standard_normal(size) / np.sqrt(hyper)
    if spec_code == 2:
        w = rng.gamma(nu / 2.0, 2.0 / nu, size=size)
        z = z / np.sqrt(w)
    return z
