"""Joint prior for the bivariate model: exponential growth priors, the
data-informed lognormal on final cases, the Beta case-fatality link, and
gamma hyperpriors on the overdispersion parameters."""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np
from scipy.special import betaln, gammaln

from . import growth
from .errors import ConfigError

K_LINKS = ("phi", "lognormal")


@dataclass(frozen=True)
class PriorConfig:
    rate_prior_mean: float = 1.0
    k_log_mean: float | None = None
    k_log_var: float = 1.0
    cfr_ref: float = 0.101
    cfr_count: float = 5.0
    hyper_shape: float = 1.0
    hyper_rate: float = 0.001
    k_link: str = "phi"
    kd_log_var: float = 1.0
    k_day: int | None = None
    k_spacing: int | None = None
    kappa_mean: float = 150.0
    eta_mean: float = 1.0

    def __post_init__(self):
        for name in ("rate_prior_mean", "k_log_var", "cfr_count", "hyper_shape",
                     "hyper_rate", "kd_log_var", "kappa_mean", "eta_mean"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 < self.cfr_ref < 1.0:
            raise ConfigError("cfr_ref must lie in (0, 1)")
        if self.k_link not in K_LINKS:
            raise ConfigError(f"k_link must be one of {K_LINKS}")

    def to_ini(self) -> str:
        lines = ["[prior]"]
        for key, value in asdict(self).items():
            if value is not None:
                lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_mapping(cls, mapping, base: "PriorConfig | None" = None) -> "PriorConfig":
        """Override fields of ``base`` from string or typed values."""
        base = base or cls()
        types = {f.name: f.type for f in fields(cls)}
        updates = {}
        for key, value in mapping.items():
            if key not in types:
                raise ConfigError(f"unknown prior setting {key!r}")
            if value is None:
                continue
            if isinstance(value, str):
                if key == "k_link":
                    updates[key] = value.strip()
                elif value.strip().lower() in ("", "none"):
                    updates[key] = None
                elif "int" in types[key]:
                    updates[key] = int(value)
                else:
                    updates[key] = float(value)
            else:
                updates[key] = value
        return replace(base, **updates)

    @classmethod
    def from_ini(cls, text: str, base: "PriorConfig | None" = None) -> "PriorConfig":
        parser = configparser.ConfigParser()
        parser.read_string(text)
        if not parser.has_section("prior"):
            return base or cls()
        return cls.from_mapping(dict(parser.items("prior")), base)


@dataclass(frozen=True)
class ThetaBivariate:
    """Natural-scale parameters. ``hyper_*`` is lambda (PG) or the precision
    1/sigma^2 (PLN, PLS). Under the lognormal link ``Phi`` holds K_d itself."""

    r_c: float
    a_c: float
    K_c: float
    r_d: float
    a_d: float
    Phi: float
    hyper_c: float
    hyper_d: float
    k_link: str = "phi"

    @property
    def K_d(self) -> float:
        return self.Phi * self.K_c if self.k_link == "phi" else self.Phi

    def as_array(self) -> np.ndarray:
        return np.array([self.r_c, self.a_c, self.K_c, self.r_d, self.a_d, self.Phi,
                         self.hyper_c, self.hyper_d])


@dataclass(frozen=True)
class LognormalPrior:
    log_mean: float
    log_var: float

    def quantile(self, q: float) -> float:
        from scipy.stats import norm

        return math.exp(self.log_mean + norm.ppf(q) * math.sqrt(self.log_var))


@dataclass(frozen=True)
class BetaPrior:
    alpha: float
    beta: float

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


def k_prior_from_series(C, M: int, m: int | None = None, log_var: float = 1.0) -> LognormalPrior:
    """Lognormal prior for final cases centred on the three-point estimate
    at day ``M``. Raises DegenerateGeometryError when the estimator fails."""
    if m is None:
        m = growth.default_spacing(M)
    k_e = growth.k_point_estimate(C, M, m)
    return LognormalPrior(math.log(k_e), log_var)


def cfr_beta_prior(phi_ref: float, count: float) -> BetaPrior:
    if not 0.0 < phi_ref < 1.0:
        raise ConfigError(f"phi_ref must lie in (0, 1), got {phi_ref}")
    if not count > 0:
        raise ConfigError("prior count must be positive")
    return BetaPrior(count * phi_ref, count * (1.0 - phi_ref))


def exponential_logpdf(x, mean):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, -math.log(mean) - x / mean, -np.inf)


def lognormal_logpdf(x, log_mean, log_var):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        lx = np.log(x)
        out = -0.5 * math.log(2 * math.pi * log_var) - lx - 0.5 * (lx - log_mean) ** 2 / log_var
    return np.where(x > 0, out, -np.inf)


def beta_logpdf(x, alpha, beta):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (alpha - 1) * np.log(x) + (beta - 1) * np.log1p(-x) - betaln(alpha, beta)
    return np.where((x > 0) & (x < 1), out, -np.inf)


def gamma_prior_logpdf(x, shape, rate):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = shape * math.log(rate) - gammaln(shape) + (shape - 1) * np.log(x) - rate * x
    return np.where(x > 0, out, -np.inf)


def resolve_k_log_mean(cfg: PriorConfig, C, M: int) -> tuple[float, str]:
    """Log-mean for the final-size prior and a note on where it came from."""
    if cfg.k_log_mean is not None:
        return cfg.k_log_mean, "user"
    t = cfg.k_day or M
    try:
        return k_prior_from_series(C, t, cfg.k_spacing, cfg.k_log_var).log_mean, "three-point"
    except growth.DomainError:
        return math.log(2.0 * float(C[M - 1])), "fallback-2C"


def log_prior(
    theta: ThetaBivariate,
    cfg: PriorConfig,
    families=("pg", "pg"),
    growth_family: str = "richards",
    k_log_mean: float | None = None,
    return_reason: bool = False,
):
    """Sum of independent prior log densities on the natural scale."""
    k_mean = cfg.k_log_mean if k_log_mean is None else k_log_mean
    if k_mean is None:
        raise ConfigError("k_log_mean unresolved; call resolve_k_log_mean first")
    values = {
        "r_c": exponential_logpdf(theta.r_c, cfg.rate_prior_mean),
        "r_d": exponential_logpdf(theta.r_d, cfg.rate_prior_mean),
        "K_c": lognormal_logpdf(theta.K_c, k_mean, cfg.k_log_var),
        "hyper_c": gamma_prior_logpdf(theta.hyper_c, cfg.hyper_shape, cfg.hyper_rate),
        "hyper_d": gamma_prior_logpdf(theta.hyper_d, cfg.hyper_shape, cfg.hyper_rate),
    }
    if growth_family in ("richards", "rosenzweig"):
        values["a_c"] = exponential_logpdf(theta.a_c, cfg.rate_prior_mean)
        values["a_d"] = exponential_logpdf(theta.a_d, cfg.rate_prior_mean)
    if cfg.k_link == "phi":
        b = cfr_beta_prior(cfg.cfr_ref, cfg.cfr_count)
        values["Phi"] = beta_logpdf(theta.Phi, b.alpha, b.beta)
    else:
        values["K_d"] = lognormal_logpdf(theta.Phi, k_mean + math.log(cfg.cfr_ref), cfg.kd_log_var)
    total = 0.0
    reason = None
    for name, v in values.items():
        v = float(v)
        if not np.isfinite(v):
            reason = reason or f"{name} outside prior support"
        total += v
    if reason is not None:
        total = -math.inf
    return (total, reason) if return_reason else total
