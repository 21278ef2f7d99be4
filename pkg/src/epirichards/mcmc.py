"""Adaptive Metropolis-within-Gibbs sampler for the Richards count models,
plus convergence diagnostics, WAIC and posterior summaries.

The sampler state is the growth parameters on log/logit scale, one latent
log-effect ``u_t`` per fitted day and outcome, and (PLS) one normal-mixture
weight per day. Each sweep runs, per free growth parameter, a single-site
random-walk move with latents held fixed followed by one that shifts the
latents to keep every Poisson rate unchanged; then a vectorised per-day
random-walk on the latents; then the conjugate draws (mixture weights,
normal precisions). Proposal scales adapt towards ``target_accept_scalar``
during burn-in and are frozen afterwards.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from . import _kernels as K
from . import errmodel, growth
from .data import EpidemicSeries
from .errors import ConfigError, DataError, InitializationError
from .prior import PriorConfig, ThetaBivariate, cfr_beta_prior, log_prior, resolve_k_log_mean

log = logging.getLogger(__name__)

TABLE_ORDER = ("K_c", "K_d", "r_c", "r_d", "a_c", "a_d", "Phi", "tau_c", "tau_d")
MAX_INIT_ATTEMPTS = 100
KAPPA_WIDE_SCALE = 5.0
_POST_BLOCK = 500


@dataclass(frozen=True)
class SamplerConfig:
    n_chains: int = 2
    n_iter: int = 100_000
    burn_in: int | None = None
    thin: int = 10
    target_accept_scalar: float = 0.44
    adapt_window: int = 50
    rhat_threshold: float = 1.05
    seed: int = 0
    block_moves: bool = True
    target_accept_block: float = 0.234

    def __post_init__(self):
        if self.n_iter < 1:
            raise ConfigError("n_iter must be positive")
        if self.n_chains < 1:
            raise ConfigError("n_chains must be positive")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.adapt_window < 1:
            raise ConfigError("adapt_window must be >= 1")
        if not self.resolved_burn_in < self.n_iter:
            raise ConfigError("burn_in must be smaller than n_iter")

    @property
    def resolved_burn_in(self) -> int:
        return self.n_iter // 2 if self.burn_in is None else self.burn_in


@dataclass
class ModelSpec:
    """Compiled description of one model: parameter layout, priors, and the
    per-outcome data arrays the kernels consume."""

    layout: int
    nphase: int
    growth_family: str
    families: tuple[str, ...]
    nu: float
    k_link: str
    t_max: int
    series: EpidemicSeries
    prior: PriorConfig
    k_log_mean: float
    k_source: str
    names: list[str]
    tr: np.ndarray
    off: np.ndarray
    pk: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    omask: np.ndarray
    free: np.ndarray
    hyp_idx: np.ndarray
    y: np.ndarray
    cprev: np.ndarray
    day: np.ndarray
    nobs: np.ndarray
    kmin: np.ndarray

    @property
    def n_out(self) -> int:
        return len(self.families)

    @property
    def efam(self) -> np.ndarray:
        return np.array([errmodel.FAMILY_CODES[f] for f in self.families], dtype=np.int64)

    @property
    def gfam(self) -> int:
        return growth.FAMILY_CODES[self.growth_family]

    @property
    def coupled(self) -> bool:
        return bool(np.any(self.pk == 5))

    def index(self, name: str) -> int:
        return self.names.index(name)

    def fit_days(self, o: int) -> np.ndarray:
        return self.day[o, : self.nobs[o]].astype(int)

    def describe(self) -> dict:
        return {
            "layout": "bivariate" if self.layout == 0 else f"{self.nphase}-phase",
            "growth_family": self.growth_family,
            "families": list(self.families),
            "nu": self.nu,
            "k_link": self.k_link,
            "t_max": self.t_max,
            "k_log_mean": self.k_log_mean,
            "k_source": self.k_source,
        }


def _outcome_arrays(counts, cum, t_max):
    t = np.arange(2, t_max + 1)
    prev = cum[t - 2].astype(float)
    keep = prev > 0
    return counts[t - 1][keep].astype(float), prev[keep], t[keep].astype(float)


def _pack(rows, L):
    n_out = len(rows)
    y = np.zeros((n_out, L))
    cprev = np.ones((n_out, L))
    day = np.zeros((n_out, L))
    nobs = np.zeros(n_out, dtype=np.int64)
    for o, (yy, cc, dd) in enumerate(rows):
        n = len(yy)
        y[o, :n], cprev[o, :n], day[o, :n] = yy, cc, dd
        nobs[o] = n
    return y, cprev, day, nobs


def _check_family(growth_family, allow_negative_mean):
    if growth_family not in growth.FAMILIES:
        raise ConfigError(f"unknown growth family {growth_family!r}")
    if growth_family == "rosenzweig" and not allow_negative_mean:
        raise ConfigError(
            "rosenzweig incidence is negative below K; pass allow_negative_mean=True "
            "(--allow-negative-mean) to use it in a likelihood"
        )


def build_bivariate(
    series: EpidemicSeries,
    t_max: int,
    prior: PriorConfig,
    families=("pg", "pg"),
    growth_family: str = "richards",
    nu: float = 4.0,
    allow_negative_mean: bool = False,
) -> ModelSpec:
    """Joint cases/deaths model fitted to days 2..t_max.

    Death days are fitted once cumulative deaths are positive (the first
    death is the conditioning observation for that outcome).
    """
    _check_family(growth_family, allow_negative_mean)
    if isinstance(families, str):
        families = (families, families)
    if not 3 <= t_max <= series.T:
        raise DataError(f"t_max={t_max} outside 3..{series.T}")
    k_mean, k_src = resolve_k_log_mean(prior, series.C, t_max)
    if k_src == "three-point" and math.exp(k_mean) <= series.C[t_max - 1]:
        k_mean, k_src = math.log(2.0 * series.C[t_max - 1]), "fallback-2C"
    rows = [_outcome_arrays(series.c, series.C, t_max), _outcome_arrays(series.d, series.D, t_max)]
    L = max(len(r[0]) for r in rows)
    y, cprev, day, nobs = _pack(rows, L)

    fixed_a = growth_family in ("logistic", "gompertz")
    bounded = growth_family in growth.BOUNDED_FAMILIES
    kmin = np.array(
        [series.C[t_max - 1], series.D[t_max - 1]] if bounded else [0.0, 0.0], dtype=float
    )
    rate = prior.rate_prior_mean
    # final sizes are sampled as log(K - floor): near saturation log K itself
    # is so tightly pinned that random-walk steps on it collapse
    names = ["r_c", "a_c", "K_c", "r_d", "a_d", "K_d"]
    tr = [0, 0, 3, 0, 0, 3]
    off = [0.0, 0.0, kmin[0], 0.0, 0.0, kmin[1]]
    pk = [0, 4 if fixed_a else 0, 1, 0, 4 if fixed_a else 0]
    p1 = [rate, rate, k_mean, rate, rate]
    p2 = [0.0, 0.0, prior.k_log_var, 0.0, 0.0]
    omask = [1, 1, 1, 2, 2, 2]
    free = [True, not fixed_a, True, True, not fixed_a, True]
    if prior.k_link == "phi":
        beta = cfr_beta_prior(prior.cfr_ref, prior.cfr_count)
        pk.append(5)
        p1.append(beta.alpha)
        p2.append(beta.beta)
    else:
        pk.append(1)
        p1.append(k_mean + math.log(prior.cfr_ref))
        p2.append(prior.kd_log_var)
    for o, fam in enumerate(families):
        names.append(f"{_hyper_name(fam)}_{'cd'[o]}")
        tr.append(0)
        off.append(0.0)
        pk.append(3)
        p1.append(prior.hyper_shape)
        p2.append(prior.hyper_rate)
        omask.append(0)
        free.append(True)
    return ModelSpec(
        layout=0, nphase=1, growth_family=growth_family, families=tuple(families), nu=nu,
        k_link=prior.k_link, t_max=t_max, series=series, prior=prior, k_log_mean=k_mean,
        k_source=k_src, names=names, tr=np.array(tr, dtype=np.int64),
        off=np.array(off, dtype=float), pk=np.array(pk, dtype=np.int64),
        p1=np.array(p1, dtype=float), p2=np.array(p2, dtype=float),
        omask=np.array(omask, dtype=np.int64), free=np.array(free),
        hyp_idx=np.array([6, 7], dtype=np.int64), y=y, cprev=cprev,
        day=day, nobs=nobs, kmin=kmin,
    )


def _hyper_name(family):
    return "lambda" if family == "pg" else "prec"


def build_phased(
    series: EpidemicSeries,
    nphase: int,
    prior: PriorConfig,
    family: str = "pls",
    growth_family: str = "richards",
    nu: float = 4.0,
    t_max: int | None = None,
    allow_negative_mean: bool = False,
) -> ModelSpec:
    """Cases-only model with ``nphase`` Richards regimes separated by
    latent switch days; ``nphase=1`` is the plain univariate model."""
    _check_family(growth_family, allow_negative_mean)
    if nphase not in (1, 2, 3):
        raise ConfigError("nphase must be 1, 2 or 3")
    t_max = series.T if t_max is None else t_max
    k_mean, k_src = resolve_k_log_mean(prior, series.C, t_max)
    rows = [_outcome_arrays(series.c, series.C, t_max)]
    y, cprev, day, nobs = _pack(rows, len(rows[0][0]))
    fixed_a = growth_family in ("logistic", "gompertz")
    rate = prior.rate_prior_mean
    apk = 4 if fixed_a else 0
    names = ["r_1", "a_1", "K_1"]
    tr, pk = [0, 0, 0], [0, apk, 1]
    p1, p2 = [rate, rate, k_mean], [0.0, 0.0, prior.k_log_var]
    free = [True, not fixed_a, True]
    for p in range(2, nphase + 1):
        names += [f"r_{p}", f"a_{p}", f"eta_{p}", f"kappa_{p - 1}"]
        tr += [0, 0, 0, 2]
        pk += [0, apk, 0, 0]
        p1 += [rate, rate, prior.eta_mean, prior.kappa_mean]
        p2 += [0.0, 0.0, 0.0, 0.0]
        free += [True, not fixed_a, True, True]
    names.append(f"{_hyper_name(family)}_c")
    tr.append(0)
    pk.append(3)
    p1.append(prior.hyper_shape)
    p2.append(prior.hyper_rate)
    free.append(True)
    n = len(names)
    omask = np.ones(n, dtype=np.int64)
    omask[-1] = 0
    return ModelSpec(
        layout=nphase, nphase=nphase, growth_family=growth_family, families=(family,), nu=nu,
        k_link="phi", t_max=t_max, series=series, prior=prior, k_log_mean=k_mean,
        k_source=k_src, names=names, tr=np.array(tr, dtype=np.int64),
        off=np.zeros(n), pk=np.array(pk, dtype=np.int64), p1=np.array(p1, dtype=float),
        p2=np.array(p2, dtype=float), omask=omask, free=np.array(free),
        hyp_idx=np.array([n - 1], dtype=np.int64), y=y, cprev=cprev, day=day, nobs=nobs,
        kmin=np.zeros(1),
    )


# --------------------------------------------------------------------------
# numpy mirror of the kernel means, vectorised over draws


def phase_K(model: ModelSpec, par: np.ndarray) -> list[np.ndarray]:
    """Final size of each phase (cases) for draws ``par`` of shape (S, n_par)."""
    Ks = [par[:, 2]]
    for p in range(2, model.nphase + 1):
        Ks.append(Ks[-1] * par[:, 3 + 4 * (p - 2) + 2])
    return Ks


def outcome_K(model: ModelSpec, par: np.ndarray, o: int) -> np.ndarray:
    return par[:, 2] if o == 0 else par[:, 5]


def mean_matrix(model: ModelSpec, par: np.ndarray, o: int, C, day) -> np.ndarray:
    """Deterministic means for each draw (rows) at cumulative ``C`` on ``day``.

    1-D ``C``/``day`` are shared by all draws; 2-D inputs broadcast against
    the (n_draws, 1) parameter columns, e.g. per-draw cumulatives (S, 1).
    """
    par = np.atleast_2d(par)
    C = np.asarray(C, dtype=float)
    day = np.asarray(day, dtype=float)
    C = C[None, :] if C.ndim == 1 else C
    day = day[None, :] if day.ndim == 1 else day
    fam = model.growth_family
    col = lambda i: par[:, i][:, None]  # noqa: E731
    with np.errstate(invalid="ignore", divide="ignore"):
        if model.layout == 0:
            if o == 0:
                return growth.incidence(fam, col(0), col(2), col(1), C)
            return growth.incidence(fam, col(3), col(5), col(4), C)
        mu = growth.incidence(fam, col(0), col(2), col(1), C)
        Ks = phase_K(model, par)
        for p in range(2, model.nphase + 1):
            base = 3 + 4 * (p - 2)
            mu_p = growth.incidence(fam, col(base), Ks[p - 1][:, None], col(base + 1), C)
            mu = np.where(day >= col(base + 3), mu_p, mu)
    return mu


def fitted_logmu(model: ModelSpec, par: np.ndarray, o: int) -> np.ndarray:
    n = model.nobs[o]
    mu = mean_matrix(model, par, o, model.cprev[o, :n], model.day[o, :n])
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(mu > 0, np.log(np.where(mu > 0, mu, 1.0)), -np.inf)


# --------------------------------------------------------------------------
# sampler


def _build_moves(model: ModelSpec, cfg: SamplerConfig):
    kinds, idx, scales, adapt, targets = [], [], [], [], []

    def add(kind, params, scale, adaptive=True, target=cfg.target_accept_scalar):
        kinds.append(kind)
        idx.append(list(params))
        scales.append(scale)
        adapt.append(adaptive)
        targets.append(target)

    hyper = set(int(h) for h in model.hyp_idx)
    for i, name in enumerate(model.names):
        if not model.free[i] or i in hyper:
            continue
        scale = {0: 0.05, 1: 0.2, 2: 1.0, 3: 0.05}[int(model.tr[i])]
        add(0, [i], scale)
        add(1, [i], scale)
        if name.startswith("kappa"):
            add(1, [i], KAPPA_WIDE_SCALE, adaptive=False)
    if cfg.block_moves:
        for group in _growth_blocks(model):
            add(1, group, 2.38 / math.sqrt(len(group)) * 0.1, target=cfg.target_accept_block)
    for o in range(model.n_out):
        h = int(model.hyp_idx[o])
        if model.families[o] == "pg":
            add(2, [h], 0.2)
        else:
            add(3, [h], 0.0, adaptive=False)
    n = len(kinds)
    mv_idx = np.zeros((n, 4), dtype=np.int64)
    mv_size = np.zeros(n, dtype=np.int64)
    mv_chol = np.zeros((n, 4, 4))
    for j, params in enumerate(idx):
        mv_idx[j, : len(params)] = params
        mv_size[j] = len(params)
        mv_chol[j, : len(params), : len(params)] = np.eye(len(params))
    return dict(
        mv_kind=np.array(kinds, dtype=np.int64), mv_size=mv_size, mv_idx=mv_idx,
        mv_chol=mv_chol, scales=np.array(scales, dtype=float), adapt=np.array(adapt),
        targets=np.array(targets),
    )


def _growth_blocks(model: ModelSpec):
    """Parameter groups that move jointly in the adaptive block proposals."""
    free = lambda names: [model.index(n) for n in names if model.free[model.index(n)]]  # noqa: E731
    if model.layout == 0:
        groups = (free(["r_c", "a_c", "K_c"]), free(["r_d", "a_d", "K_d"]))
        return [g for g in groups if len(g) > 1]
    groups = [free(["r_1", "a_1", "K_1"])]
    for p in range(2, model.nphase + 1):
        groups.append(free([f"r_{p}", f"a_{p}", f"eta_{p}"]))
    return [g for g in groups if len(g) > 1]


def _initial_par(model: ModelSpec, rng: np.random.Generator, attempt: int) -> np.ndarray:
    """Starting state: growth rates and shapes from their priors, final
    sizes at the data-informed centre (prior draws on later attempts),
    hyperparameters at 10, then +-10% jitter."""
    prior = model.prior
    par = np.ones(len(model.names))
    for i, name in enumerate(model.names):
        if not model.free[i]:
            continue
        pk, p1, p2 = model.pk[i], model.p1[i], model.p2[i]
        if name.startswith(("lambda", "prec")):
            par[i] = 10.0
        elif name.startswith("kappa"):
            par[i] = _initial_kappa(model, int(name.split("_")[1]))
        elif name.startswith("eta"):
            par[i] = 1.0 + 0.05 * rng.random()
        elif pk == 0:
            par[i] = rng.exponential(p1)
        elif pk == 1:
            val = math.exp(p1 if attempt == 0 else p1 + math.sqrt(p2) * rng.standard_normal())
            if model.off[i] > 0 and val <= model.off[i]:
                val = 2.0 * model.off[i]
            par[i] = val
        elif pk == 5:
            phi = prior.cfr_ref if attempt == 0 else rng.beta(p1, p2)
            val = phi * par[2]
            if val <= model.off[i]:
                val = model.off[i] + 0.5 * (par[2] - model.off[i])
            par[i] = val
    jitter = rng.uniform(0.9, 1.1, size=par.shape)
    jitter[~model.free] = 1.0
    for i in range(len(par)):
        if model.tr[i] == 3:
            par[i] = model.off[i] + (par[i] - model.off[i]) * jitter[i]
        else:
            par[i] *= jitter[i]
    return par


def _initial_kappa(model: ModelSpec, k: int) -> float:
    """Evenly spaced switch days over the fitted window."""
    return 1.0 + model.t_max * k / model.nphase


def _arrays(model: ModelSpec):
    return dict(
        y=model.y, cprev=model.cprev, day=model.day, nobs=model.nobs, efam=model.efam,
        nu=np.full(model.n_out, float(model.nu)), hyp_idx=model.hyp_idx, kmin=model.kmin,
        layout=model.layout, nphase=model.nphase, gfam=model.gfam, 
        tr=model.tr, off=model.off, pk=model.pk, p1=model.p1, p2=model.p2, omask=model.omask,
    )


def state_log_target(model: ModelSpec, par, u, w) -> float:
    """Sampling-scale log target (Jacobians included, constants dropped)."""
    logmu = np.zeros_like(model.y)
    if not K.refresh_logmu(par, logmu, model.cprev, model.day, model.nobs, model.layout,
                           model.nphase, model.gfam):
        return -math.inf
    if not K.constraints_ok(par, model.layout, model.nphase, model.kmin, model.n_out):
        return -math.inf
    return float(K.log_target(par, u, w, logmu, model.y, model.nobs, model.efam,
                              model.hyp_idx, model.tr, model.off, model.pk, model.p1,
                              model.p2))


@dataclass
class ChainResult:
    par: np.ndarray
    u: np.ndarray
    w: np.ndarray
    scales: np.ndarray
    accept: np.ndarray
    latent_accept: np.ndarray
    final_scales: np.ndarray


def _run_chain(model: ModelSpec, cfg: SamplerConfig, seed_seq, chain: int) -> ChainResult:
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    moves = _build_moves(model, cfg)
    n_out, L = model.y.shape
    arrs = _arrays(model)

    par = None
    for attempt in range(MAX_INIT_ATTEMPTS):
        cand = _initial_par(model, rng, attempt)
        u0 = np.zeros((n_out, L))
        w0 = np.ones((n_out, L))
        if np.isfinite(state_log_target(model, cand, u0, w0)):
            par = cand
            break
    if par is None:
        raise InitializationError(
            f"chain {chain}: no finite starting point in {MAX_INIT_ATTEMPTS} attempts "
            f"(K_c prior log-mean {model.k_log_mean:.3f}, observed C={model.kmin[0]:.0f})"
        )
    u, w = u0, w0
    logmu = np.zeros((n_out, L))
    K.refresh_logmu(par, logmu, model.cprev, model.day, model.nobs, model.layout,
                    model.nphase, model.gfam)
    z = np.array([K.to_unconstrained(int(t), x, o) for t, x, o in zip(model.tr, par, model.off)])
    lpz = np.array([K.prior_lpz(int(model.pk[i]), model.p1[i], model.p2[i], int(model.tr[i]),
                                model.off[i], par[i]) for i in range(len(par))])

    mv_kind, mv_size, mv_idx = moves["mv_kind"], moves["mv_size"], moves["mv_idx"]
    mv_chol, scales = moves["mv_chol"], moves["scales"]
    n_moves = len(mv_kind)
    lat_scales = 1.0 / np.sqrt(model.y + 10.0)
    acc = np.zeros(n_moves, dtype=np.int64)
    tries = np.zeros(n_moves, dtype=np.int64)
    lat_acc = np.zeros((n_out, L), dtype=np.int64)

    gshape = np.ones(n_moves)
    for j in range(n_moves):
        if mv_kind[j] == 3:
            i = mv_idx[j, 0]
            o = int(np.nonzero(model.hyp_idx == i)[0][0])
            gshape[j] = model.p1[i] + 0.5 * model.nobs[o]
    any_pls = "pls" in model.families
    lat_gshape = 0.5 * (model.nu + 1.0)

    burn_in = cfg.resolved_burn_in
    n_keep = len(range(burn_in, cfg.n_iter, cfg.thin))
    keep_par = np.zeros((n_keep, len(par)))
    keep_u = np.zeros((n_keep, n_out, L))
    keep_w = np.ones((n_keep, n_out, L))
    keep_scales = np.zeros((n_keep, n_moves))
    keep_pos = 0

    block_groups = [j for j in range(n_moves) if mv_size[j] > 1]
    chol_set = np.zeros(n_moves, dtype=bool)
    history = []
    window = 0
    it = 0
    while it < cfg.n_iter:
        if it < burn_in:
            nb = min(cfg.adapt_window, burn_in - it)
        else:
            nb = min(_POST_BLOCK, cfg.n_iter - it)
        rn_move = rng.standard_normal((nb, n_moves, 4))
        ru_move = rng.random((nb, n_moves))
        rg_move = rng.standard_gamma(gshape, size=(nb, n_moves))
        rn_lat = rng.standard_normal((nb, n_out, L))
        ru_lat = rng.random((nb, n_out, L))
        rg_lat = (rng.standard_gamma(lat_gshape, size=(nb, n_out, L)) if any_pls
                  else np.ones((nb, n_out, L)))
        keep_pos = K.run_block(
            it, nb, burn_in, cfg.thin, par, z, lpz, u, w, logmu,
            arrs["y"], arrs["cprev"], arrs["day"], arrs["nobs"], arrs["efam"], arrs["nu"],
            arrs["hyp_idx"], arrs["kmin"], arrs["layout"], arrs["nphase"], arrs["gfam"],
            arrs["tr"], arrs["off"], arrs["pk"], arrs["p1"], arrs["p2"], arrs["omask"],
            model.coupled,
            mv_kind, mv_size, mv_idx, mv_chol, scales, lat_scales, acc, tries, lat_acc,
            rn_move, ru_move, rg_move, rn_lat, ru_lat, rg_lat,
            keep_par, keep_u, keep_w, keep_scales, keep_pos,
        )
        if it < burn_in:
            window += 1
            gain = min(1.0, 2.0 / math.sqrt(window))
            rate = acc / np.maximum(tries, 1)
            step = np.where(moves["adapt"] & (tries > 0), rate - moves["targets"], 0.0)
            scales *= np.exp(gain * step)
            lat_rate = lat_acc / nb
            lat_scales *= np.exp(gain * (lat_rate - cfg.target_accept_scalar))
            acc[:] = 0
            tries[:] = 0
            lat_acc[:] = 0
            if block_groups:
                history.append(z.copy())
                if window % 20 == 0 and it + nb <= burn_in and len(history) >= 40:
                    _update_block_chol(mv_chol, mv_idx, mv_size, scales, block_groups,
                                       np.array(history[len(history) // 2:]), chol_set)
        it += nb

    n_post = max(cfg.n_iter - burn_in, 1)
    return ChainResult(
        par=keep_par[:keep_pos], u=keep_u[:keep_pos], w=keep_w[:keep_pos],
        scales=keep_scales[:keep_pos], accept=acc / np.maximum(tries, 1),
        latent_accept=lat_acc / n_post, final_scales=scales.copy(),
    )


def _update_block_chol(mv_chol, mv_idx, mv_size, scales, block_groups, hist, chol_set):
    """Shape block proposals by the empirical covariance of recent states."""
    for j in block_groups:
        d = mv_size[j]
        ids = mv_idx[j, :d]
        cov = np.cov(hist[:, ids], rowvar=False) + 1e-10 * np.eye(d)
        try:
            L = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            continue
        mv_chol[j, :d, :d] = L
        if not chol_set[j]:
            scales[j] = 2.38 / math.sqrt(d)
            chol_set[j] = True


@dataclass
class PosteriorDraws:
    """Retained states of all chains, with derived quantities.

    ``par`` is (n_chains, n_keep, n_par) on the natural scale; ``u`` and
    ``w`` are (n_chains, n_keep, n_out, L) in the model's compact layout.
    """

    model: ModelSpec
    config: SamplerConfig
    par: np.ndarray
    u: np.ndarray
    w: np.ndarray
    iters: np.ndarray
    scales: np.ndarray
    accept: np.ndarray
    latent_accept: np.ndarray
    derived: dict = field(default_factory=dict)

    @property
    def n_chains(self) -> int:
        return self.par.shape[0]

    @property
    def n_keep(self) -> int:
        return self.par.shape[1]

    def flat_par(self) -> np.ndarray:
        return self.par.reshape(-1, self.par.shape[-1])

    def scalars(self) -> dict[str, np.ndarray]:
        """Every scalar quantity as (n_chains, n_keep)."""
        out = {name: self.par[:, :, i] for i, name in enumerate(self.model.names)
               if self.model.free[i]}
        out.update(self.derived)
        return out

    def flat(self, name: str) -> np.ndarray:
        return self.scalars()[name].reshape(-1)

    def pointwise_loglik(self, o: int) -> np.ndarray:
        """log p(y_t | theta_s, eps_ts) as (n_draws, n_days) for outcome ``o``."""
        m = self.model
        n = m.nobs[o]
        par = self.flat_par()
        lm = fitted_logmu(m, par, o)
        u = self.u.reshape(-1, m.n_out, self.u.shape[-1])[:, o, :n]
        return errmodel.poisson_logpmf(m.y[o, :n][None, :], np.exp(lm + u))

    def latents_full(self, o: int) -> np.ndarray:
        """Log-effects as (n_draws, t_max) indexed by day-1; NaN where unfitted."""
        m = self.model
        n = m.nobs[o]
        out = np.full((self.n_chains * self.n_keep, m.t_max), np.nan)
        days = m.fit_days(o)
        out[:, days - 1] = self.u.reshape(-1, m.n_out, self.u.shape[-1])[:, o, :n]
        return out


def run_chains(
    model: ModelSpec, cfg: SamplerConfig | None = None, n_jobs: int = 1
) -> PosteriorDraws:
    """Sample ``cfg.n_chains`` independent chains for ``model``.

    Chains get independent streams spawned from ``cfg.seed`` and may run in
    worker processes (``n_jobs > 1``); output is identical either way.
    """
    cfg = cfg or SamplerConfig()
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_chains)
    if n_jobs > 1 and cfg.n_chains > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=min(n_jobs, cfg.n_chains)) as pool:
            results = list(pool.map(_run_chain, [model] * cfg.n_chains, [cfg] * cfg.n_chains,
                                    seeds, range(cfg.n_chains)))
    else:
        results = [_run_chain(model, cfg, s, c) for c, s in enumerate(seeds)]
    burn_in = cfg.resolved_burn_in
    draws = PosteriorDraws(
        model=model, config=cfg,
        par=np.stack([r.par for r in results]), u=np.stack([r.u for r in results]),
        w=np.stack([r.w for r in results]),
        iters=np.arange(burn_in, cfg.n_iter, cfg.thin),
        scales=np.stack([r.scales for r in results]),
        accept=np.stack([r.accept for r in results]),
        latent_accept=np.stack([r.latent_accept for r in results]),
    )
    draws.derived = derived_quantities(model, draws.par)
    return draws


def derived_quantities(model: ModelSpec, par: np.ndarray) -> dict[str, np.ndarray]:
    """K_d, turning points and sigma for each draw; shape follows ``par[..., 0]``."""
    shape = par.shape[:-1]
    flat = par.reshape(-1, par.shape[-1])
    out = {}
    if model.layout == 0:
        if model.k_link == "phi":
            out["Phi"] = flat[:, 5] / flat[:, 2]
        s = model.series
        for o, (tag, cum) in enumerate((("c", s.C), ("d", s.D))):
            tau, day = turning_points(model, flat, o, cum[: model.t_max])
            out[f"tau_{tag}"] = tau
            out[f"tau_{tag}_day"] = day
    else:
        Ks = phase_K(model, flat)
        for p in range(2, model.nphase + 1):
            out[f"K_{p}"] = Ks[p - 1]
    for o, fam in enumerate(model.families):
        if fam != "pg":
            out[f"sigma_{'cd'[o]}"] = 1.0 / np.sqrt(flat[:, model.hyp_idx[o]])
    return {k: v.reshape(shape) for k, v in out.items()}


def turning_points(model: ModelSpec, par: np.ndarray, o: int, cum, horizon: int = 5000):
    """Interpolated crossing day of the peak threshold, and the integer day
    of maximal expected incidence, per draw.

    Draws whose threshold lies beyond the observed cumulative series are
    continued with the noise-free recursion from the last observed value.
    """
    cum = np.asarray(cum, dtype=float)
    Kp = outcome_K(model, par, o)
    a = par[:, 1] if o == 0 else par[:, 4]
    r = par[:, 0] if o == 0 else par[:, 3]
    if model.growth_family == "gompertz":
        thr = Kp / np.e
    else:
        thr = growth.peak_threshold(Kp, a)
    tau = growth.crossing_days(cum, thr)
    pos = cum > 0
    days = np.arange(2, len(cum) + 1)
    prev = cum[:-1]
    mu = np.full((len(par), len(days)), -np.inf)
    ok = prev > 0
    if ok.any():
        with np.errstate(invalid="ignore", divide="ignore"):
            mu[:, ok] = growth.incidence(model.growth_family, r[:, None], Kp[:, None],
                                         a[:, None], prev[ok][None, :])
    day = days[np.argmax(mu, axis=1)].astype(float) if len(days) else np.ones(len(par))
    todo = np.nonzero(np.isnan(tau))[0]
    if len(todo) and pos.any():
        C = np.full(len(todo), cum[-1])
        done = np.zeros(len(todo), dtype=bool)
        ext = np.full(len(todo), np.nan)
        for step in range(1, horizon + 1):
            with np.errstate(invalid="ignore", divide="ignore"):
                inc = growth.incidence(model.growth_family, r[todo], Kp[todo], a[todo], C)
            inc = np.where(np.isfinite(inc) & (inc > 0), inc, 0.0)
            C_new = C + inc
            cross = (~done) & (C_new >= thr[todo])
            frac = np.where(inc > 0, (thr[todo] - C) / np.where(inc > 0, inc, 1.0), 1.0)
            ext[cross] = len(cum) + step - 1 + frac[cross]
            done |= cross
            C = C_new
            if done.all():
                break
        tau[todo] = np.where(done, ext, len(cum) + horizon + 1)
        day[todo] = np.floor(tau[todo]) + 1
    return tau, day


# --------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class Rhat:
    value: float
    degenerate: bool = False


def gelman_rubin(chains) -> dict[str, Rhat] | Rhat:
    """Split-R-hat. Accepts PosteriorDraws (all scalars) or one
    (n_chains, n_draws) array."""
    if isinstance(chains, PosteriorDraws):
        return {k: gelman_rubin(v) for k, v in chains.scalars().items()}
    x = np.asarray(chains, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 10:
        raise ConfigError("split R-hat needs >= 2 chains of >= 10 draws")
    half = x.shape[1] // 2
    split = np.concatenate([x[:, :half], x[:, x.shape[1] - half:]], axis=0)
    n = split.shape[1]
    W = np.mean(np.var(split, axis=1, ddof=1))
    B = n * np.var(np.mean(split, axis=1), ddof=1)
    if not W > 0 or not np.isfinite(W):
        return Rhat(1.0, True)
    var_plus = (n - 1) / n * W + B / n
    return Rhat(float(np.sqrt(var_plus / W)))


@dataclass(frozen=True)
class WaicPart:
    lppd: float
    p_waic: float

    @property
    def waic(self) -> float:
        return -2.0 * (self.lppd - self.p_waic)


@dataclass(frozen=True)
class WaicReport:
    parts: tuple[WaicPart, ...]
    labels: tuple[str, ...] = ("cases", "deaths")

    @property
    def waic_cases(self) -> float:
        return self.parts[0].waic

    @property
    def waic_deaths(self) -> float:
        return self.parts[1].waic if len(self.parts) > 1 else 0.0

    @property
    def waic_total(self) -> float:
        return sum(p.waic for p in self.parts)

    def rows(self):
        for label, part in zip(self.labels, self.parts):
            yield label, part.lppd, part.p_waic, part.waic
        yield "total", sum(p.lppd for p in self.parts), sum(p.p_waic for p in self.parts), \
            self.waic_total


def waic_from_loglik(ll) -> WaicPart:
    """``ll`` is (n_draws, n_points)."""
    ll = np.asarray(ll, dtype=float)
    if ll.shape[0] < 2:
        raise ConfigError("WAIC needs at least 2 draws")
    lppd = float(np.sum(logsumexp(ll, axis=0) - math.log(ll.shape[0])))
    p = float(np.sum(np.var(ll, axis=0, ddof=1)))
    return WaicPart(lppd, p)


def waic(draws: PosteriorDraws) -> WaicReport:
    parts = tuple(waic_from_loglik(draws.pointwise_loglik(o)) for o in range(draws.model.n_out))
    return WaicReport(parts, ("cases", "deaths")[: len(parts)])


def summarize(draws, quantiles=(0.025, 0.5, 0.975), names=None) -> list[dict]:
    """Mean and type-7 quantiles per quantity, pooled across chains.

    ``draws`` may be PosteriorDraws or a mapping of name -> samples.
    """
    source = draws.scalars() if isinstance(draws, PosteriorDraws) else dict(draws)
    if names is None:
        names = [n for n in TABLE_ORDER if n in source]
        names += [n for n in source if n not in names]
    rows = []
    for name in names:
        x = np.asarray(source[name], dtype=float).reshape(-1)
        row = {"parameter": name, "mean": float(np.mean(x))}
        for q in quantiles:
            row[_qlabel(q)] = float(np.quantile(x, q))
        rows.append(row)
    return rows


def _qlabel(q: float) -> str:
    return "median" if q == 0.5 else f"q{100 * q:g}"


# --------------------------------------------------------------------------
# independent natural-scale log posterior


def log_posterior(
    theta: ThetaBivariate,
    latents,
    series: EpidemicSeries,
    prior: PriorConfig,
    err=(errmodel.ErrorSpec("pg", lam=1.0),) * 2,
    t_max: int | None = None,
    growth_family: str = "richards",
    k_log_mean: float | None = None,
) -> float:
    """Joint log density of data, effects and parameters for the bivariate
    model, assembled from the error and prior modules.

    ``latents`` is a pair of LatentEffects whose ``eps`` arrays cover days
    2..t_max; entries for unfitted death days are ignored. The error specs
    supply the family; their numeric parameters are taken from ``theta``.
    """
    t_max = series.T if t_max is None else t_max
    k_mean = k_log_mean
    if k_mean is None:
        k_mean, _ = resolve_k_log_mean(prior, series.C, t_max)
    if theta.K_c <= series.C[t_max - 1] or theta.K_d <= series.D[t_max - 1]:
        return -math.inf
    total = log_prior(theta, prior, [e.family for e in err], growth_family, k_mean)
    if not np.isfinite(total):
        return -math.inf
    params = [
        (theta.r_c, theta.K_c, theta.a_c, series.c, series.C, theta.hyper_c),
        (theta.r_d, theta.K_d, theta.a_d, series.d, series.D, theta.hyper_d),
    ]
    for (r, Kf, a, new, cum, hyper), spec, lat in zip(params, err, latents):
        t = np.arange(2, t_max + 1)
        prev = cum[t - 2].astype(float)
        keep = prev > 0
        mu = growth.incidence(growth_family, r, Kf, a, prev[keep])
        if np.any(mu <= 0):
            return -math.inf
        eps = np.asarray(lat.eps, dtype=float)[keep]
        total += float(np.sum(errmodel.log_obs(new[t - 1][keep], mu, eps)))
        if spec.family == "pg":
            s = replace(spec, lam=hyper)
        else:
            s = replace(spec, sigma=1.0 / math.sqrt(hyper))
        mix = None if spec.family != "pls" else np.asarray(lat.mix_scale)[keep]
        total += float(np.sum(errmodel.log_effect_prior(s, eps, mix)))
    return total


# --------------------------------------------------------------------------
# CSV output


def draws_to_csv(draws: PosteriorDraws) -> str:
    scalars = draws.scalars()
    names = list(scalars)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["chain", "iter", *names])
    for c in range(draws.n_chains):
        for k in range(draws.n_keep):
            writer.writerow([c, int(draws.iters[k]),
                             *(repr(float(scalars[n][c, k])) for n in names)])
    return buf.getvalue()


def latents_to_csv(draws: PosteriorDraws, o: int = 0) -> str:
    """One row per retained draw: chain, iter, then u_t for t = 1..t_max."""
    full = draws.latents_full(o)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["chain", "iter", *(f"u_{t}" for t in range(1, full.shape[1] + 1))])
    row = 0
    for c in range(draws.n_chains):
        for k in range(draws.n_keep):
            writer.writerow([c, int(draws.iters[k]),
                             *("" if np.isnan(v) else f"{v:.10g}" for v in full[row])])
            row += 1
    return buf.getvalue()


def summary_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()
