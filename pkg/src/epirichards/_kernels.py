"""Hot loops of the Metropolis-within-Gibbs sampler.

Everything here is plain numpy restricted to what numba's nopython mode
supports, so :func:`njit` either compiles it or leaves it as interpreted numpy.
All randomness arrives pre-drawn from the caller's ``numpy.random.Generator``;
the compiled and interpreted paths consume identical streams.

Conventions
-----------
Outcome ``o`` (0 cases, 1 deaths) has ``nobs[o]`` active days stored
left-aligned in ``(n_out, L)`` arrays: counts ``y``, previous cumulative
``cprev`` and day index ``day``. Latent log-effects ``u`` and PLS mixture
weights ``w`` share that layout.

Parameter transforms ``tr``: 0 log, 1 logit, 2 identity reflected at 1,
3 log of the excess over a floor ``off``.
Prior kinds ``pk``: 0 exponential(mean p1), 1 lognormal(p1, p2),
2 beta(p1, p2), 3 gamma(shape p1, rate p2), 4 flat, 5 beta(p1, p2) on the
ratio of this parameter to ``par[2]`` (final deaths over final cases),
including the 1/K_c Jacobian; this last one is the only non-separable term
and is handled by :func:`coupled_lp`.
Move kinds: 0 latents held fixed, 1 latents shifted so every Poisson rate
is unchanged, 2 MH on a latent-prior hyperparameter, 3 conjugate draw of
a normal precision.
Error families: 0 PG, 1 PLN, 2 PLS. Growth families follow
``growth.FAMILIES`` order. Layout 0 is the bivariate model; layout >= 1 is
the cases-only model with that many phases. Slot 5 of the bivariate
layout always holds final deaths K_d; the fatality ratio is derived.
"""

import math

import numpy as np

from ._jit import njit

NEG_INF = -np.inf


@njit
def growth_mean(fam, r, a, K, C):
    if fam == 2:
        return r * C * np.log(K / C)
    if fam == 3:
        return r * C * ((C / K) ** a - 1.0)
    return r * C * (1.0 - (C / K) ** a)


@njit
def outcome_K(par, o):
    return par[2] if o == 0 else par[5]


@njit
def outcome_mean(par, layout, nphase, fam, o, C, day):
    if layout == 0:
        if o == 0:
            return growth_mean(fam, par[0], par[1], par[2], C)
        return growth_mean(fam, par[3], par[4], par[5], C)
    mu = growth_mean(fam, par[0], par[1], par[2], C)
    K = par[2]
    for p in range(1, nphase):
        base = 3 + 4 * (p - 1)
        K = K * par[base + 2]
        mu_p = growth_mean(fam, par[base], par[base + 1], K, C)
        mu = np.where(day >= par[base + 3], mu_p, mu)
    return mu


@njit
def constraints_ok(par, layout, nphase, kmin, n_out):
    for o in range(n_out):
        if kmin[o] > 0.0 and outcome_K(par, o) <= kmin[o]:
            return False
    if layout >= 1:
        for p in range(2, nphase):
            if par[3 + 4 * (p - 1) + 3] <= par[3 + 4 * (p - 2) + 3]:
                return False
    return True


@njit
def to_natural(tr, z, off):
    if tr == 0:
        return math.exp(z)
    if tr == 1:
        return 1.0 / (1.0 + math.exp(-z))
    if tr == 3:
        return off + math.exp(z)
    return z


@njit
def to_unconstrained(tr, x, off):
    if tr == 0:
        return math.log(x)
    if tr == 1:
        return math.log(x) - math.log1p(-x)
    if tr == 3:
        return math.log(x - off)
    return x


@njit
def prior_lpz(pk, p1, p2, tr, off, x):
    """Separable prior log density of one parameter on the sampling scale."""
    if pk == 0:
        if x <= 0.0:
            return NEG_INF
        lp = -math.log(p1) - x / p1
    elif pk == 1:
        if x <= 0.0:
            return NEG_INF
        lx = math.log(x)
        lp = -0.5 * math.log(2.0 * math.pi * p2) - lx - 0.5 * (lx - p1) ** 2 / p2
    elif pk == 2:
        if x <= 0.0 or x >= 1.0:
            return NEG_INF
        lp = (
            (p1 - 1.0) * math.log(x)
            + (p2 - 1.0) * math.log1p(-x)
            - (math.lgamma(p1) + math.lgamma(p2) - math.lgamma(p1 + p2))
        )
    elif pk == 3:
        if x <= 0.0:
            return NEG_INF
        lp = p1 * math.log(p2) - math.lgamma(p1) + (p1 - 1.0) * math.log(x) - p2 * x
    else:
        lp = 0.0
    if tr == 0:
        lp += math.log(x)
    elif tr == 1:
        lp += math.log(x) + math.log1p(-x)
    elif tr == 3:
        if x <= off:
            return NEG_INF
        lp += math.log(x - off)
    return lp


@njit
def coupled_lp(par, pk, p1, p2):
    """Beta prior on K_d / K_c plus its Jacobian, for pk == 5 slots."""
    lp = 0.0
    for i in range(par.shape[0]):
        if pk[i] == 5:
            x = par[i] / par[2]
            if x <= 0.0 or x >= 1.0:
                return NEG_INF
            lp += (
                (p1[i] - 1.0) * math.log(x)
                + (p2[i] - 1.0) * math.log1p(-x)
                - (math.lgamma(p1[i]) + math.lgamma(p2[i]) - math.lgamma(p1[i] + p2[i]))
                - math.log(par[2])
            )
    return lp


@njit
def poisson_kernel(y, logmu, u):
    """Poisson log-likelihood without the log(y!) constant."""
    eta = logmu + u
    return np.sum(y * eta - np.exp(eta))


@njit
def latent_terms(efam, hyper, u, w):
    """Pointwise latent log density on the u scale, hyper-free constants dropped."""
    if efam == 0:
        return hyper * u - hyper * np.exp(u)
    return -0.5 * hyper * w * u * u


@njit
def latent_sum(efam, hyper, u, w):
    """Latent log density summed over days, keeping hyper-dependent terms."""
    n = u.shape[0]
    s = np.sum(latent_terms(efam, hyper, u, w))
    if efam == 0:
        return s + n * (hyper * math.log(hyper) - math.lgamma(hyper))
    return s + 0.5 * n * math.log(hyper)


@njit
def log_target(par, u, w, logmu, y, nobs, efam, hyp_idx, tr, off, pk, p1, p2):
    """Full sampling-scale log target for the current state (constants dropped)."""
    total = coupled_lp(par, pk, p1, p2)
    for i in range(par.shape[0]):
        total += prior_lpz(pk[i], p1[i], p2[i], tr[i], off[i], par[i])
    for o in range(nobs.shape[0]):
        n = nobs[o]
        total += poisson_kernel(y[o, :n], logmu[o, :n], u[o, :n])
        total += latent_sum(efam[o], par[hyp_idx[o]], u[o, :n], w[o, :n])
    return total


@njit
def refresh_logmu(par, logmu, cprev, day, nobs, layout, nphase, gfam):
    """Recompute log means; returns False on any nonpositive mean."""
    for o in range(nobs.shape[0]):
        n = nobs[o]
        mu = outcome_mean(par, layout, nphase, gfam, o, cprev[o, :n], day[o, :n])
        if n > 0 and np.min(mu) <= 0.0:
            return False
        logmu[o, :n] = np.log(mu)
    return True


@njit
def run_block(
    it0, nb, burn_in, thin,
    par, z, lpz, u, w, logmu,
    y, cprev, day, nobs, efam, nu, hyp_idx, kmin,
    layout, nphase, gfam,
    tr, off, pk, p1, p2, omask, coupled,
    mv_kind, mv_size, mv_idx, mv_chol, scales,
    lat_scales, acc, tries, lat_acc,
    rn_move, ru_move, rg_move, rn_lat, ru_lat, rg_lat,
    keep_par, keep_u, keep_w, keep_scales, keep_pos,
):
    """Advance one chain by ``nb`` sweeps starting at iteration ``it0``.

    Retained states are written from row ``keep_pos``; the new position is
    returned.
    """
    n_out = nobs.shape[0]
    n_moves = mv_kind.shape[0]
    L = y.shape[1]
    new_logmu = np.empty((n_out, L))
    new_u = np.empty((n_out, L))
    hit = np.zeros(n_out, dtype=np.bool_)
    for b in range(nb):
        for j in range(n_moves):
            kind = mv_kind[j]
            if kind == 3:
                i = mv_idx[j, 0]
                for o in range(n_out):
                    if hyp_idx[o] == i:
                        n = nobs[o]
                        ss = np.sum(w[o, :n] * u[o, :n] * u[o, :n])
                        x = rg_move[b, j] / (p2[i] + 0.5 * ss)
                        par[i] = x
                        z[i] = math.log(x)
                        lpz[i] = prior_lpz(pk[i], p1[i], p2[i], tr[i], off[i], x)
                continue

            size = mv_size[j]
            tries[j] += 1
            old_par = par.copy()
            delta = 0.0
            mask = 0
            ok = True
            for k in range(size):
                i = mv_idx[j, k]
                step = 0.0
                for m in range(k + 1):
                    step += mv_chol[j, k, m] * rn_move[b, j, m]
                zn = z[i] + scales[j] * step
                if tr[i] == 2 and zn < 1.0:
                    zn = 2.0 - zn
                x = to_natural(tr[i], zn, off[i])
                if (tr[i] == 1 and (x <= 0.0 or x >= 1.0)) or (tr[i] == 3 and x <= off[i]):
                    ok = False
                    break
                par[i] = x
                lp_new = prior_lpz(pk[i], p1[i], p2[i], tr[i], off[i], x)
                delta += lp_new - lpz[i]
                mask |= omask[i]
            if ok and coupled:
                delta += coupled_lp(par, pk, p1, p2) - coupled_lp(old_par, pk, p1, p2)
            if ok and not (delta > NEG_INF):
                ok = False
            if ok and not constraints_ok(par, layout, nphase, kmin, n_out):
                ok = False
            if ok:
                if kind == 2:
                    i = mv_idx[j, 0]
                    for o in range(n_out):
                        if hyp_idx[o] == i:
                            n = nobs[o]
                            delta += latent_sum(efam[o], par[i], u[o, :n], w[o, :n])
                            delta -= latent_sum(efam[o], old_par[i], u[o, :n], w[o, :n])
                else:
                    for o in range(n_out):
                        hit[o] = (mask >> o) & 1 == 1
                        if not hit[o]:
                            continue
                        n = nobs[o]
                        if n == 0:
                            continue
                        mu = outcome_mean(par, layout, nphase, gfam, o, cprev[o, :n], day[o, :n])
                        if np.min(mu) <= 0.0:
                            ok = False
                            break
                        lm = np.log(mu)
                        new_logmu[o, :n] = lm
                        hyper = par[hyp_idx[o]]
                        if kind == 0:
                            delta += poisson_kernel(y[o, :n], lm, u[o, :n])
                            delta -= poisson_kernel(y[o, :n], logmu[o, :n], u[o, :n])
                        else:
                            un = u[o, :n] + logmu[o, :n] - lm
                            new_u[o, :n] = un
                            delta += latent_sum(efam[o], hyper, un, w[o, :n])
                            delta -= latent_sum(efam[o], hyper, u[o, :n], w[o, :n])
            if ok and math.log(ru_move[b, j]) < delta:
                acc[j] += 1
                for k in range(size):
                    i = mv_idx[j, k]
                    z[i] = to_unconstrained(tr[i], par[i], off[i])
                    lpz[i] = prior_lpz(pk[i], p1[i], p2[i], tr[i], off[i], par[i])
                if kind < 2:
                    for o in range(n_out):
                        if hit[o]:
                            n = nobs[o]
                            logmu[o, :n] = new_logmu[o, :n]
                            if kind == 1:
                                u[o, :n] = new_u[o, :n]
            else:
                par[:] = old_par
            for o in range(n_out):
                hit[o] = False

        for o in range(n_out):
            n = nobs[o]
            if n == 0:
                continue
            hyper = par[hyp_idx[o]]
            uo = u[o, :n]
            wo = w[o, :n]
            prop = uo + lat_scales[o, :n] * rn_lat[b, o, :n]
            lm = logmu[o, :n]
            d = (
                y[o, :n] * (prop - uo)
                - (np.exp(lm + prop) - np.exp(lm + uo))
                + latent_terms(efam[o], hyper, prop, wo)
                - latent_terms(efam[o], hyper, uo, wo)
            )
            take = np.log(ru_lat[b, o, :n]) < d
            u[o, :n] = np.where(take, prop, uo)
            lat_acc[o, :n] += take.astype(np.int64)
            if efam[o] == 2:
                un = u[o, :n]
                w[o, :n] = rg_lat[b, o, :n] / (0.5 * (nu[o] + hyper * un * un))

        it = it0 + b
        if it >= burn_in and (it - burn_in) % thin == 0:
            keep_par[keep_pos, :] = par
            keep_u[keep_pos, :, :] = u
            keep_w[keep_pos, :, :] = w
            keep_scales[keep_pos, :] = scales
            keep_pos += 1
    return keep_pos
