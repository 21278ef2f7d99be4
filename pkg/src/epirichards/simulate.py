"""Synthetic epidemics drawn from the fitted model's generative direction."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from . import errmodel, growth
from .data import EpidemicSeries
from .errors import ConfigError
from .errmodel import ErrorSpec
from .growth import GrowthParams


@dataclass(frozen=True)
class Phase:
    """A later growth regime active from day ``kappa`` onwards."""

    growth: GrowthParams
    kappa: float


@dataclass(frozen=True)
class DeathLink:
    """Death curve with final size ``phi * K_c``, seeded with ``d_1`` deaths
    on day ``start``."""

    phi: float
    r: float
    a: float = 1.0
    d_1: int = 1
    start: int = 1
    error: ErrorSpec | None = None

    def __post_init__(self):
        if not 0 < self.phi < 1:
            raise ConfigError("phi must lie in (0, 1)")
        if self.d_1 < 1 or self.start < 1:
            raise ConfigError("d_1 and start must be >= 1")


@dataclass(frozen=True)
class SimSpec:
    growth: GrowthParams
    error: ErrorSpec
    T: int
    c_1: int = 1
    death_link: DeathLink | None = None
    phases: tuple[Phase, ...] = ()
    seed: int = 0
    deterministic: bool = False
    origin_date: dt.date = dt.date(2020, 1, 31)

    def __post_init__(self):
        if self.c_1 < 1:
            raise ConfigError("c_1 must be >= 1")
        if self.T < 3:
            raise ConfigError("T must be >= 3")
        kappas = [p.kappa for p in self.phases]
        if any(b <= a for a, b in zip(kappas, kappas[1:])):
            raise ConfigError("phase switch days must increase")
        if self.error.family == "pg" and self.error.lam is None:
            raise ConfigError("PG error needs lam")
        if self.error.family != "pg" and self.error.sigma is None:
            raise ConfigError(f"{self.error.family} error needs sigma")


def _hyper(spec: ErrorSpec) -> float:
    return spec.lam if spec.family == "pg" else 1.0 / spec.sigma**2


def _mean(params: GrowthParams, C: float) -> float:
    if C <= 0:
        return 0.0
    return float(growth.incidence(params.family, params.r, params.K, params.a, C))


def _active(spec: SimSpec, t: int) -> GrowthParams:
    params = spec.growth
    for ph in spec.phases:
        if t >= ph.kappa:
            params = ph.growth
    return params


def simulate_epidemic(spec: SimSpec) -> EpidemicSeries:
    """Draw new cases (and deaths, if linked) for days 1..T.

    Each day draws the effect first and then the count, cases before deaths,
    from one generator seeded by ``spec.seed``. A nonpositive mean gives a
    zero count.
    """
    rng = np.random.default_rng(spec.seed)
    T = spec.T
    c = np.zeros(T, dtype=np.int64)
    d = np.zeros(T, dtype=np.int64)
    c[0] = spec.c_1
    link = spec.death_link
    if link is not None:
        if link.start > T:
            raise ConfigError("death start beyond T")
        d[link.start - 1] = link.d_1
        d_growth = GrowthParams(spec.growth.family, link.r, link.phi * spec.growth.K,
                                link.a)
        d_err = link.error or spec.error
    C, D = float(c[0]), float(d.sum())
    for t in range(2, T + 1):
        c[t - 1] = _draw(_mean(_active(spec, t), C), spec.error, spec, rng)
        C += c[t - 1]
        if link is not None and t > link.start:
            d[t - 1] = _draw(_mean(d_growth, D), d_err, spec, rng)
            D += d[t - 1]
    return EpidemicSeries(c=c, d=d, origin_date=spec.origin_date)


def _draw(mu: float, err: ErrorSpec, spec: SimSpec, rng) -> int:
    if spec.deterministic:
        return int(round(mu)) if mu > 0 else 0
    u = errmodel.draw_effects(err.code, _hyper(err), err.nu, None, rng)
    if mu <= 0:
        return 0
    return int(rng.poisson(mu * np.exp(u)))


def deterministic_path(params: GrowthParams, C_start: float, n: int, phases=(), t_start=2):
    """Noise-free recursion C_t = C_{t-1} + max(mu(C_{t-1}), 0) for ``n``
    days from ``t_start``; returns the daily increments (unrounded)."""
    spec_like = SimSpec(params, ErrorSpec.pg(1.0), T=3, phases=tuple(phases))
    out = np.zeros(n)
    C = float(C_start)
    for k in range(n):
        mu = max(_mean(_active(spec_like, t_start + k), C), 0.0)
        out[k] = mu
        C += mu
    return out
