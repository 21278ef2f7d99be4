"""Posterior-predictive forecasts beyond the training window and
cross-validation scoring by overprediction probability."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import errmodel
from .data import EpidemicSeries
from .errors import ConfigError, DataError
from .mcmc import PosteriorDraws, fitted_logmu, mean_matrix

FAN_QUANTILES = (0.025, 0.25, 0.5, 0.75, 0.975)
MAX_RATE = 1e12
OUTCOMES = ("cases", "deaths")


@dataclass(frozen=True)
class ForecastPath:
    draw_id: int
    days: np.ndarray
    c_new: np.ndarray
    d_new: np.ndarray | None
    C_new: np.ndarray
    D_new: np.ndarray | None


@dataclass
class ForecastPaths:
    """One simulated continuation per retained draw.

    ``new[o]`` and ``cum[o]`` are (n_draws, F) for each outcome; ``cum`` starts
    from the observed cumulative at day M.
    """

    M: int
    F: int
    new: list[np.ndarray]
    cum: list[np.ndarray]
    start: list[float]
    origin_date: object = None

    @property
    def days(self) -> np.ndarray:
        return np.arange(self.M + 1, self.M + self.F + 1)

    @property
    def n_draws(self) -> int:
        return self.new[0].shape[0]

    def __len__(self):
        return self.n_draws

    def __getitem__(self, s: int) -> ForecastPath:
        has_d = len(self.new) > 1
        return ForecastPath(
            draw_id=s, days=self.days, c_new=self.new[0][s], C_new=self.cum[0][s],
            d_new=self.new[1][s] if has_d else None, D_new=self.cum[1][s] if has_d else None,
        )


def predict_paths(
    draws: PosteriorDraws,
    series: EpidemicSeries,
    M: int | None = None,
    F: int = 20,
    rng: np.random.Generator | int | None = None,
    deterministic: bool = False,
) -> ForecastPaths:
    """Forward-simulate F days from the observed cumulatives at day M.

    Each day draws a fresh effect per draw from that draw's hyperparameters,
    multiplies the growth mean at the previous cumulative, and samples a
    Poisson count; nonpositive means give zero. All draws advance together
    on one generator. With ``deterministic`` the effects are 1 and counts
    are rounded means.
    """
    model = draws.model
    M = model.t_max if M is None else M
    if M != model.t_max:
        raise ConfigError(f"draws were fitted to t_max={model.t_max}, not M={M}")
    if F < 1:
        raise ConfigError("forecast horizon F must be >= 1")
    if M > series.T:
        raise DataError(f"M={M} beyond series length {series.T}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    par = draws.flat_par()
    S = par.shape[0]
    cum_obs = (series.C, series.D)
    n_out = model.n_out
    start = [float(cum_obs[o][M - 1]) for o in range(n_out)]
    prev = [np.full(S, start[o]) for o in range(n_out)]
    new = [np.zeros((S, F), dtype=np.int64) for _ in range(n_out)]
    cum = [np.zeros((S, F)) for _ in range(n_out)]
    for h in range(F):
        t = M + 1 + h
        for o in range(n_out):
            C = prev[o]
            mu = np.zeros(S)
            pos = C > 0
            if pos.any():
                mu[pos] = mean_matrix(model, par[pos], o, C[pos][:, None], [t])[:, 0]
            mu = np.where(np.isfinite(mu) & (mu > 0), mu, 0.0)
            if deterministic:
                count = np.rint(mu).astype(np.int64)
            else:
                hyper = par[:, model.hyp_idx[o]]
                code = errmodel.FAMILY_CODES[model.families[o]]
                u = errmodel.draw_effects(code, hyper, model.nu, S, rng)
                rate = np.minimum(mu * np.exp(u), MAX_RATE)
                count = rng.poisson(rate)
            new[o][:, h] = count
            prev[o] = C + count
            cum[o][:, h] = prev[o]
    return ForecastPaths(M=M, F=F, new=new, cum=cum, start=start,
                         origin_date=series.origin_date)


@dataclass(frozen=True)
class OutcomeScore:
    omega: float
    pred_lo: float
    pred_mean: float
    pred_hi: float
    actual: float

    @property
    def covered(self) -> bool:
        return self.pred_lo <= self.actual <= self.pred_hi

    @property
    def verdict(self) -> str:
        return verdict(self.omega)


def verdict(omega: float) -> str:
    if omega <= 0.05:
        return "under"
    if omega >= 0.95:
        return "over"
    return "satisfactory"


@dataclass(frozen=True)
class CrossValReport:
    M: int
    F: int
    scores: tuple[OutcomeScore, ...]

    @property
    def omega_c(self) -> float:
        return self.scores[0].omega

    @property
    def omega_d(self) -> float | None:
        return self.scores[1].omega if len(self.scores) > 1 else None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["outcome", "M", "F", "omega", "pred_avg_lo", "pred_avg_mean",
                    "pred_avg_hi", "actual_avg", "covered", "verdict"])
        for name, s in zip(OUTCOMES, self.scores):
            w.writerow([name, self.M, self.F, f"{s.omega:.6g}", f"{s.pred_lo:.6g}",
                        f"{s.pred_mean:.6g}", f"{s.pred_hi:.6g}", f"{s.actual:.6g}",
                        int(s.covered), s.verdict])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [f"Cross-validation, training to day {self.M}, horizon {self.F} days"]
        for name, s in zip(OUTCOMES, self.scores):
            lines.append(
                f"  {name:6s} omega={s.omega:.3f} ({s.verdict}); predicted average "
                f"{s.pred_mean:.1f} [{s.pred_lo:.1f}, {s.pred_hi:.1f}], actual {s.actual:.1f}"
                f"{'' if s.covered else ' (outside interval)'}"
            )
        return "\n".join(lines) + "\n"


def score_outcome(pred_new: np.ndarray, actual_new) -> OutcomeScore:
    """Overprediction probability and predicted-average interval.

    ``pred_new`` is (n_draws, F); ties count as not overpredicting.
    """
    pred_new = np.asarray(pred_new, dtype=float)
    if pred_new.size == 0:
        raise ConfigError("no forecast paths")
    avg = pred_new.mean(axis=1)
    actual = float(np.mean(actual_new))
    lo, hi = np.quantile(avg, [0.025, 0.975])
    return OutcomeScore(float(np.mean(avg > actual)), float(lo), float(avg.mean()),
                        float(hi), actual)


def crossval(paths: ForecastPaths, heldout: EpidemicSeries | dict) -> CrossValReport:
    """Score forecast paths against the observed days M+1..M+F.

    ``heldout`` is the full series (must extend to M+F) or a mapping with
    ``c`` and ``d`` arrays covering exactly the horizon.
    """
    if paths.n_draws == 0:
        raise ConfigError("no forecast paths")
    if isinstance(heldout, EpidemicSeries):
        if heldout.T < paths.M + paths.F:
            raise DataError(
                f"series ends at day {heldout.T}; crossval needs day {paths.M + paths.F}"
            )
        sl = slice(paths.M, paths.M + paths.F)
        actual = (heldout.c[sl], heldout.d[sl])
    else:
        actual = (np.asarray(heldout["c"]), np.asarray(heldout.get("d", [])))
        if len(actual[0]) != paths.F:
            raise DataError("held-out cases must cover exactly the horizon")
    scores = tuple(score_outcome(paths.new[o], actual[o]) for o in range(len(paths.new)))
    return CrossValReport(paths.M, paths.F, scores)


def fan_table(paths: ForecastPaths, quantiles=FAN_QUANTILES) -> list[dict]:
    rows = []
    for h, day in enumerate(paths.days):
        row = {"day": int(day)}
        if paths.origin_date is not None:
            import datetime as dt

            row["date"] = (paths.origin_date + dt.timedelta(days=int(day) - 1)).isoformat()
        for o in range(len(paths.new)):
            for kind, arr in (("new", paths.new[o]), ("cum", paths.cum[o])):
                x = arr[:, h].astype(float)
                key = f"{kind}_{OUTCOMES[o]}"
                row[f"{key}_mean"] = float(x.mean())
                for q, v in zip(quantiles, np.quantile(x, quantiles)):
                    row[f"{key}_q{100 * q:g}"] = float(v)
        rows.append(row)
    return rows


def fan_to_csv(paths: ForecastPaths) -> str:
    rows = fan_table(paths)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def fitted_incidence(draws: PosteriorDraws, o: int = 0) -> np.ndarray:
    """Per-draw in-sample rates mu_t * eps_t on the fitted days, (n_draws, n_days)."""
    m = draws.model
    n = m.nobs[o]
    u = draws.u.reshape(-1, m.n_out, draws.u.shape[-1])[:, o, :n]
    return np.exp(fitted_logmu(m, draws.flat_par(), o) + u)


def insample_predictions(draws: PosteriorDraws, o: int = 0, rng=None,
                         replicate: bool = True) -> np.ndarray:
    """Posterior-predicted new counts for days 1..t_max, (n_draws, t_max).

    Day 1 (and any unfitted day) carries the observed count; fitted days get
    a Poisson replicate at the draw's rate, or the rate itself when
    ``replicate`` is False.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    m = draws.model
    obs = (m.series.c, m.series.d)[o][: m.t_max].astype(float)
    rate = fitted_incidence(draws, o)
    out = np.tile(obs, (rate.shape[0], 1))
    days = m.fit_days(o)
    out[:, days - 1] = rng.poisson(np.minimum(rate, MAX_RATE)) if replicate else rate
    return out


def mean_abs_deviation(draws: PosteriorDraws, o: int = 0) -> float:
    """Average absolute gap between observed counts and the posterior mean
    in-sample rate on the fitted days."""
    m = draws.model
    pred = fitted_incidence(draws, o).mean(axis=0)
    return float(np.mean(np.abs(pred - m.y[o, : m.nobs[o]])))
