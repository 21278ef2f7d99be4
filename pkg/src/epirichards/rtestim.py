"""Serial-interval construction and the effective reproduction ratio
R_t = c_t / sum_j rho_j c_{t-j} from predicted incidence."""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special, stats

from .data import moving_average
from .errors import ConfigError, SolverError

DEFAULT_SI_MEAN = 3.5
DEFAULT_SI_SD = 3.1
DEFAULT_J = 16


@dataclass(frozen=True)
class GammaSI:
    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ConfigError("gamma shape and rate must be positive")
        if not math.isfinite(self.shape / self.rate):
            raise ConfigError("gamma mean must be finite")

    @property
    def mean(self) -> float:
        return self.shape / self.rate

    @property
    def sd(self) -> float:
        return math.sqrt(self.shape) / self.rate

    def cdf(self, x):
        return stats.gamma.cdf(x, self.shape, scale=1.0 / self.rate)

    def ppf(self, q):
        return stats.gamma.ppf(q, self.shape, scale=1.0 / self.rate)


@dataclass(frozen=True)
class SerialInterval:
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if (w.ndim != 1 or len(w) < 2 or not np.all(np.isfinite(w)) or np.any(w < 0)
                or abs(w.sum() - 1.0) > 1e-12):
            raise ConfigError("serial-interval weights must be nonnegative and sum to 1")
        object.__setattr__(self, "weights", w)

    @property
    def J(self) -> int:
        return len(self.weights) - 1


def gamma_from_mean_sd(mean: float, sd: float) -> GammaSI:
    if not (mean > 0 and sd > 0):
        raise ConfigError("mean and sd must be positive")
    return GammaSI((mean / sd) ** 2, mean / sd**2)


def _quantile_ratio(shape, p1, p2):
    lo = special.gammaincinv(shape, p1)
    hi = special.gammaincinv(shape, p2)
    if not (lo > 0 and np.isfinite(hi)):
        return math.inf
    return hi / lo


def gamma_from_quantiles(q1, q2, tol: float = 1e-8) -> GammaSI:
    """Gamma matching two (probability, value) pairs.

    Bisection on log-shape over [1e-4, 1e4]; for each trial shape the rate
    is fixed by the first quantile, and the second is matched to ``tol``.
    """
    (p1, v1), (p2, v2) = q1, q2
    if not (0 < p1 < p2 < 1):
        raise ConfigError("need 0 < prob1 < prob2 < 1")
    if not (0 < v1 < v2):
        raise ConfigError("need 0 < value1 < value2")
    target = v2 / v1

    def f(log_shape):
        return _quantile_ratio(math.exp(log_shape), p1, p2) - target

    a, b = math.log(1e-4), math.log(1e4)
    fa, fb = f(a), f(b)
    if not (fa > 0 > fb):
        raise SolverError(
            f"no gamma with shape in [1e-4, 1e4] matches quantiles {q1}, {q2}"
        )
    log_shape = optimize.bisect(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                                maxiter=500)
    shape = math.exp(log_shape)
    rate = special.gammaincinv(shape, p1) / v1
    g = GammaSI(shape, rate)
    err = abs(float(g.ppf(p2)) - v2)
    if err > tol * max(1.0, v2):
        raise SolverError(f"quantile mismatch {err:.3g} days after bisection")
    return g


def pool_si(components, n_per: int = 1_000_000, seed: int = 0) -> GammaSI:
    """Moment-matched gamma for the union of ``n_per`` draws from each
    component."""
    components = list(components)
    if not components:
        raise ConfigError("need at least one component")
    if n_per < 10_000:
        raise ConfigError("n_per must be >= 1e4")
    rng = np.random.default_rng(seed)
    x = np.concatenate([rng.gamma(g.shape, 1.0 / g.rate, size=n_per) for g in components])
    m, v = x.mean(), x.var()
    return GammaSI(m * m / v, m / v)


def discretize_si(g: GammaSI, J: int = DEFAULT_J, include_same_day: bool = True) -> SerialInterval:
    """Half-integer CDF bins: rho_0 = F(0.5), rho_j = F(j+0.5) - F(j-0.5).

    Without the same-day term, the mass below 0.5 is folded into lag 1.
    Weights are renormalised over lags 0..J.
    """
    if J < 1:
        raise ConfigError("J must be >= 1")
    edges = g.cdf(np.arange(J + 1) + 0.5)
    w = np.diff(np.concatenate([[0.0], edges]))
    if not include_same_day:
        w[1] += w[0]
        w[0] = 0.0
    w = np.clip(w, 0.0, None)
    if not w.sum() > 0:
        raise ConfigError(f"serial interval has no mass within J={J} days")
    w = w / w.sum()
    return SerialInterval(w)


def default_si(J: int = DEFAULT_J, include_same_day: bool = True) -> SerialInterval:
    return discretize_si(gamma_from_mean_sd(DEFAULT_SI_MEAN, DEFAULT_SI_SD), J, include_same_day)


@dataclass
class RtSeries:
    """Posterior summaries of R_t on days ``day`` (1-based)."""

    day: np.ndarray
    mean: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    ma5: np.ndarray
    origin_date: dt.date | None = None

    @property
    def significantly_above_1(self) -> np.ndarray:
        return self.lo > 1.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["day", "date", "Rt_mean", "Rt_lo", "Rt_hi", "Rt_ma5", "sig_above_1"])
        fmt = lambda v: "" if not np.isfinite(v) else f"{v:.6g}"  # noqa: E731
        for k, d in enumerate(self.day):
            date = ("" if self.origin_date is None
                    else (self.origin_date + dt.timedelta(days=int(d) - 1)).isoformat())
            w.writerow([int(d), date, fmt(self.mean[k]), fmt(self.lo[k]), fmt(self.hi[k]),
                        fmt(self.ma5[k]), int(self.significantly_above_1[k])])
        return buf.getvalue()


def rt_matrix(pred_cases, si: SerialInterval) -> np.ndarray:
    """Per-draw R_t, (n_draws, n_days - J); column k is day J + 1 + k.

    Zero denominators give NaN.
    """
    x = np.atleast_2d(np.asarray(pred_cases, dtype=float))
    J = si.J
    n = x.shape[1]
    if n <= J:
        raise ConfigError(f"trajectory of {n} days is not longer than J={J}")
    denom = np.zeros((x.shape[0], n - J))
    for j, rho in enumerate(si.weights):
        denom += rho * x[:, J - j: n - j]
    num = x[:, J:]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(denom > 0, num / denom, np.nan)


def effective_r(pred_cases, si: SerialInterval, origin_date=None, ma_window: int = 5) -> RtSeries:
    """Posterior mean, 95% interval and centred moving average of R_t."""
    R = rt_matrix(pred_cases, si)
    J = si.J
    day = np.arange(J + 1, J + 1 + R.shape[1])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean = np.nanmean(R, axis=0)
        lo, hi = np.nanquantile(R, [0.025, 0.975], axis=0)
    ma = np.full_like(mean, np.nan)
    ok = np.isfinite(mean)
    # moving average over each run of defined days
    start = None
    for k in range(len(mean) + 1):
        if k < len(mean) and ok[k]:
            start = k if start is None else start
        elif start is not None:
            seg = mean[start:k]
            win = min(ma_window, len(seg) if len(seg) % 2 else len(seg) - 1)
            ma[start:k] = moving_average(seg, win) if win >= 1 else seg
            start = None
    return RtSeries(day, mean, lo, hi, ma, origin_date)


def read_components(text: str) -> list[GammaSI]:
    """One gamma per line as ``shape rate`` (comma or whitespace separated);
    ``#`` starts a comment."""
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ConfigError(f"line {lineno}: expected 'shape rate'")
        out.append(GammaSI(float(parts[0]), float(parts[1])))
    return out
