"""Richards-family growth curves: incidence means, closed forms, turning
points, and the three-point final-size estimator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateGeometryError, DomainError

FAMILIES = ("richards", "logistic", "gompertz", "rosenzweig")
BOUNDED_FAMILIES = ("richards", "logistic", "gompertz")
FAMILY_CODES = {name: i for i, name in enumerate(FAMILIES)}

DEGENERATE_RTOL = 1e-9


@dataclass(frozen=True)
class GrowthParams:
    family: str
    r: float
    K: float
    a: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown growth family {self.family!r}")
        if not (self.r > 0 and self.K > 0 and self.a > 0):
            raise DomainError(f"growth parameters must be positive: {self}")
        if self.family == "logistic" and self.a != 1.0:
            object.__setattr__(self, "a", 1.0)


@dataclass(frozen=True)
class TurningPoint:
    tau: float
    peak_threshold: float
    reached: bool = True
    argmax_day: int | None = None


def incidence(family: str, r, K, a, C):
    """Vectorised C'(t) evaluated at cumulative ``C`` (no domain checks)."""
    C = np.asarray(C, dtype=float)
    if family in ("richards", "logistic"):
        return r * C * (1.0 - (C / K) ** a)
    if family == "gompertz":
        return r * C * np.log(K / C)
    if family == "rosenzweig":
        return r * C * ((C / K) ** a - 1.0)
    raise ConfigError(f"unknown growth family {family!r}")


def mean_incidence(p: GrowthParams, C_prev):
    """Expected new cases given the previous day's cumulative count.

    Rosenzweig is evaluated as written and may be negative below K; bounded
    families are clamped at zero against rounding noise only.
    """
    C_prev = np.asarray(C_prev, dtype=float)
    if np.any(C_prev <= 0):
        raise DomainError("cumulative count must be positive")
    if p.family in BOUNDED_FAMILIES and np.any(C_prev > p.K):
        raise DomainError(f"cumulative count exceeds K={p.K} for {p.family}")
    mu = incidence(p.family, p.r, p.K, p.a, C_prev)
    if p.family in BOUNDED_FAMILIES:
        tiny = -1e-12 * p.r * p.K
        mu = np.where((mu < 0) & (mu > tiny), 0.0, mu)
    return mu[()] if mu.ndim == 0 else mu


def richards_cumulative(p: GrowthParams, t, tau: float):
    """Closed form K / (1 + exp(-r (t - tau)))^(1/a)."""
    if p.family not in ("richards", "logistic"):
        raise ConfigError(f"no closed form implemented for {p.family}")
    t = np.asarray(t, dtype=float)
    out = p.K * np.exp(-np.log1p(np.exp(-p.r * (t - tau))) / p.a)
    return out[()] if out.ndim == 0 else out


def peak_threshold(K, a):
    """Cumulative count at which Richards incidence peaks."""
    return K * (1.0 + a) ** (-1.0 / a)


def turning_point(p: GrowthParams, C_traj, t0: int = 1) -> TurningPoint:
    """Day (interpolated) at which a cumulative trajectory crosses the peak
    threshold. ``C_traj[0]`` is day ``t0``.

    If the threshold is never crossed, ``tau`` is the day after the last
    trajectory day and ``reached`` is False.
    """
    C_traj = np.asarray(C_traj, dtype=float)
    if p.family == "gompertz":
        thr = p.K / np.e
    else:
        thr = peak_threshold(p.K, p.a)
    tau, reached = _crossing(C_traj, thr)
    mu = incidence(p.family, p.r, p.K, p.a, np.maximum(C_traj, 1e-300))
    # incidence on day t+1 is driven by C_t
    argmax_day = int(np.argmax(mu)) + 1 + t0
    return TurningPoint(float(tau + t0 - 1), float(thr), reached, argmax_day)


def _crossing(C, thr):
    above = np.nonzero(C >= thr)[0]
    if len(above) == 0:
        return float(len(C) + 1), False
    i = above[0]
    if i == 0:
        return 1.0, True
    lo, hi = C[i - 1], C[i]
    frac = (thr - lo) / (hi - lo) if hi > lo else 1.0
    return float(i + frac), True


def crossing_days(C, thr):
    """Vectorised threshold crossing for many thresholds on one trajectory.

    Returns interpolated day indices (1-based); NaN where never crossed.
    """
    C = np.asarray(C, dtype=float)
    thr = np.asarray(thr, dtype=float)
    i = np.searchsorted(np.maximum.accumulate(C), thr, side="left")
    out = np.full(thr.shape, np.nan)
    ok = i < len(C)
    first = ok & (i == 0)
    out[first] = 1.0
    mid = ok & (i > 0)
    j = i[mid]
    lo, hi = C[j - 1], C[j]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(hi > lo, (thr[mid] - lo) / (hi - lo), 1.0)
    out[mid] = j + frac
    return out


def k_point_estimate(C, t: int, m: int) -> float:
    """Final-size estimate from cumulative counts at days t-2m, t-m, t.

    Exact for noise-free logistic data. ``C[0]`` is day 1.
    """
    C = np.asarray(C, dtype=float)
    if m < 1 or t - 2 * m < 1 or t > len(C):
        raise DomainError(f"need 1 <= t-2m and t <= {len(C)} (t={t}, m={m})")
    c0, c1, c2 = C[t - 2 * m - 1], C[t - m - 1], C[t - 1]
    denom = c1 * c1 - c2 * c0
    if abs(denom) < DEGENERATE_RTOL * c2 * c2:
        raise DegenerateGeometryError(
            f"three-point estimator denominator ~0 at t={t}, m={m} (exponential phase?)"
        )
    k = c1 * (c0 * c1 - 2.0 * c0 * c2 + c1 * c2) / denom
    if k <= 0:
        raise DegenerateGeometryError(f"three-point estimator gave nonpositive K={k:.4g}")
    return float(k)


def default_spacing(t: int) -> int:
    """First/middle/last spacing for the three-point estimator."""
    return (t - 1) // 2
