"""Command-line front end.

Every command writes CSV outputs, a text summary where relevant, and
``manifest.json`` holding the resolved configuration, seed and input
checksum. Settings resolve as command-line flag, then the ``--config`` INI
file, then built-in defaults.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import hashlib
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, forecast, mcmc, multiphase, rtestim
from .data import ColumnMap, EpidemicSeries, load_series, series_to_csv
from .errmodel import ErrorSpec
from .errors import ConfigError, DataError, DomainError, InitializationError, SolverError
from .growth import FAMILIES, GrowthParams
from .prior import PriorConfig
from .simulate import DeathLink, Phase, SimSpec, simulate_epidemic

log = logging.getLogger("epirichards")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CONVERGENCE = 0, 2, 3, 4

RUN_DEFAULTS = {
    "family": "pg",
    "growth": "richards",
    "seed": 0,
    "nu": 4.0,
    "region": None,
    "negative_policy": "error",
    "m": None,
    "f": 20,
    "phases": 2,
    "allow_unconverged": False,
    "allow_negative_mean": False,
    "jobs": 1,
}
SAMPLER_KEYS = ("n_chains", "n_iter", "burn_in", "thin", "adapt_window", "rhat_threshold",
                "target_accept_scalar")
SI_DEFAULTS = {"mean": rtestim.DEFAULT_SI_MEAN, "sd": rtestim.DEFAULT_SI_SD, "J": 16,
               "same_day": True, "quantiles": None, "components": None}


class ConvergenceFailure(Exception):
    pass


# --------------------------------------------------------------------------
# configuration


def _read_ini(path):
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read_string(p.read_text())
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return {s: dict(parser.items(s)) for s in parser.sections()}


def _coerce(value, like):
    if not isinstance(value, str):
        return value
    if isinstance(like, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    if value.strip().lower() in ("", "none"):
        return None
    return value


def _layer(defaults, file_section, cli_values):
    out = dict(defaults)
    for key, value in file_section.items():
        if key not in out:
            raise ConfigError(f"unknown setting {key!r}")
        like = defaults[key]
        if like is None and key in ("m",):
            like = 0
        out[key] = _coerce(value, like)
    for key, value in cli_values.items():
        if value is not None:
            out[key] = value
    return out


def resolve_config(args) -> dict:
    ini = _read_ini(args.config)
    run_cli = {k: getattr(args, k, None) for k in RUN_DEFAULTS}
    for flag in ("allow_unconverged", "allow_negative_mean"):
        if getattr(args, flag, False):
            run_cli[flag] = True
        else:
            run_cli[flag] = None
    run = _layer(RUN_DEFAULTS, ini.get("run", {}), run_cli)
    if run["family"] not in ("pg", "pln", "pls"):
        raise ConfigError(f"family must be pg, pln or pls, got {run['family']!r}")
    if run["growth"] not in FAMILIES:
        raise ConfigError(f"growth family must be one of {FAMILIES}")

    prior = PriorConfig.from_mapping(ini.get("prior", {}))
    cli_prior = {"k_link": getattr(args, "k_link", None)}
    prior = PriorConfig.from_mapping({k: v for k, v in cli_prior.items() if v is not None}, prior)

    base = dataclasses.asdict(mcmc.SamplerConfig())
    sampler_defaults = {k: base[k] for k in SAMPLER_KEYS}
    sampler_defaults["burn_in"] = None
    s_ini = ini.get("sampler", {})
    sampler = dict(sampler_defaults)
    for key, value in s_ini.items():
        if key not in sampler:
            raise ConfigError(f"unknown sampler setting {key!r}")
        sampler[key] = None if value.strip().lower() in ("", "none") else (
            float(value) if key in ("rhat_threshold", "target_accept_scalar") else int(value))
    for key, attr in (("n_chains", "chains"), ("n_iter", "iter"), ("burn_in", "burn_in"),
                      ("thin", "thin")):
        v = getattr(args, attr, None)
        if v is not None:
            sampler[key] = v

    si = _layer(SI_DEFAULTS, ini.get("si", {}), {
        "mean": getattr(args, "si_mean", None), "sd": getattr(args, "si_sd", None),
        "J": getattr(args, "si_J", None),
        "same_day": False if getattr(args, "no_same_day", False) else None,
        "quantiles": getattr(args, "si_quantiles", None),
        "components": getattr(args, "si_components", None),
    })
    return {"command": args.command, "run": run, "prior": dataclasses.asdict(prior),
            "sampler": sampler, "si": si}


def _sampler_config(cfg) -> mcmc.SamplerConfig:
    try:
        return mcmc.SamplerConfig(seed=cfg["run"]["seed"], **cfg["sampler"])
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _prior(cfg) -> PriorConfig:
    return PriorConfig(**cfg["prior"])


# --------------------------------------------------------------------------
# inputs and outputs


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_input(args, cfg) -> EpidemicSeries:
    if args.input is None:
        raise ConfigError("--input is required")
    path = Path(args.input)
    if not path.is_file():
        raise ConfigError(f"input file not found: {path}")
    run = cfg["run"]
    schema = None
    if getattr(args, "columns", None):
        names = [n.strip() for n in args.columns.split(",")]
        if len(names) not in (3, 4):
            raise ConfigError("--columns needs date,cases,deaths[,region]")
        schema = ColumnMap(*[n or None for n in names] + [None] * (4 - len(names)))
    return load_series(path, schema=schema, region=run["region"],
                       negative_policy=run["negative_policy"])


def _record_input(cfg, args):
    if getattr(args, "input", None):
        cfg["input"] = {"path": str(args.input), "sha256": sha256_file(args.input)}


class Outputs:
    def __init__(self, out):
        if out is None:
            raise ConfigError("--out is required")
        self.dir = Path(out)
        self.dir.mkdir(parents=True, exist_ok=True)

    def write(self, name, text):
        (self.dir / name).write_text(text)
        log.info("wrote %s", self.dir / name)

    def manifest(self, cfg):
        payload = {"epirichards_version": __version__, **cfg}
        self.write("manifest.json", json.dumps(payload, indent=2, sort_keys=True, default=str)
                   + "\n")


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _rhat_rows(draws):
    rh = mcmc.gelman_rubin(draws)
    return [(k, f"{v.value:.6g}", int(v.degenerate)) for k, v in rh.items()], rh


def _waic_csv(report: mcmc.WaicReport) -> str:
    return _rows_csv(["outcome", "lppd", "p_waic", "waic"],
                     [(lab, f"{a:.6g}", f"{b:.6g}", f"{c:.6g}") for lab, a, b, c in report.rows()])


def _summary_text(title, model, rows, report, rh, threshold) -> str:
    lines = [title, "", f"k prior log-mean {model.k_log_mean:.4f} ({model.k_source})", ""]
    lines.append(f"{'parameter':<12}{'mean':>14}{'2.5%':>14}{'median':>14}{'97.5%':>14}")
    for r in rows:
        lines.append(f"{r['parameter']:<12}{r['mean']:>14.6g}{r['q2.5']:>14.6g}"
                     f"{r['median']:>14.6g}{r['q97.5']:>14.6g}")
    lines += ["", "WAIC (conditional on latent effects)"]
    for lab, lppd, p, w in report.rows():
        lines.append(f"  {lab:<7} lppd={lppd:.2f} p_waic={p:.2f} waic={w:.2f}")
    worst = max(rh.items(), key=lambda kv: kv[1].value)
    lines += ["", f"max split R-hat {worst[1].value:.4f} ({worst[0]}); threshold {threshold}"]
    return "\n".join(lines) + "\n"


def _write_fit(outs: Outputs, draws, cfg, title):
    rows = mcmc.summarize(draws)
    report = mcmc.waic(draws)
    rhat_rows, rh = _rhat_rows(draws)
    outs.write("draws.csv", mcmc.draws_to_csv(draws))
    for o, name in enumerate(("cases", "deaths")[: draws.model.n_out]):
        outs.write(f"latents_{name}.csv", mcmc.latents_to_csv(draws, o))
    outs.write("summary.csv", mcmc.summary_to_csv(rows))
    outs.write("waic.csv", _waic_csv(report))
    outs.write("rhat.csv", _rows_csv(["parameter", "rhat", "degenerate"], rhat_rows))
    thr = draws.config.rhat_threshold
    outs.write("summary.txt", _summary_text(title, draws.model, rows, report, rh, thr))
    bad = [k for k, v in rh.items() if v.value > thr]
    return bad


def _check_convergence(bad, cfg):
    if bad and not cfg["run"]["allow_unconverged"]:
        raise ConvergenceFailure(f"R-hat above threshold for: {', '.join(sorted(bad))}")


# --------------------------------------------------------------------------
# model construction shared by fitting and reloading


def _build_model(cfg, series: EpidemicSeries):
    run = cfg["run"]
    prior = _prior(cfg)
    if cfg.get("model") == "phased" or cfg["command"] == "multiphase":
        return mcmc.build_phased(series, int(run["phases"]), prior, run["family"],
                                 run["growth"], run["nu"], run["m"] or series.T,
                                 run["allow_negative_mean"])
    m = run["m"] or series.T
    if m < 3:
        raise ConfigError("--m must be >= 3")
    return mcmc.build_bivariate(series, m, prior, (run["family"],) * 2, run["growth"],
                                run["nu"], run["allow_negative_mean"])


def load_run(run_dir) -> tuple[dict, mcmc.PosteriorDraws]:
    """Rebuild the model and retained draws from a fit or multiphase run."""
    run_dir = Path(run_dir)
    for name in ("manifest.json", "draws.csv"):
        if not (run_dir / name).is_file():
            raise ConfigError(f"missing prerequisite artifact {run_dir / name}")
    cfg = json.loads((run_dir / "manifest.json").read_text())
    inp = cfg.get("input", {}).get("path")
    if inp is None or not Path(inp).is_file():
        raise ConfigError(f"run input {inp!r} referenced by {run_dir / 'manifest.json'} missing")
    if sha256_file(inp) != cfg["input"]["sha256"]:
        raise DataError(f"input {inp} changed since the run (sha256 mismatch)")
    run = cfg["run"]
    series = load_series(inp, region=run["region"], negative_policy=run["negative_policy"])
    model = _build_model(cfg, series)
    scfg = _sampler_config(cfg)
    with open(run_dir / "draws.csv") as fh:
        rows = list(csv.DictReader(fh))
    chains = sorted({int(r["chain"]) for r in rows})
    n_keep = sum(1 for r in rows if int(r["chain"]) == chains[0])
    par = np.ones((len(chains), n_keep, len(model.names)))
    for k, r in enumerate(rows):
        c, j = divmod(k, n_keep)
        for i, name in enumerate(model.names):
            if model.free[i]:
                par[c, j, i] = float(r[name])
    n_out, L = model.y.shape
    u = np.zeros((len(chains), n_keep, n_out, L))
    for o, name in enumerate(("cases", "deaths")[:n_out]):
        path = run_dir / f"latents_{name}.csv"
        if not path.is_file():
            continue
        with open(path) as fh:
            lrows = list(csv.reader(fh))[1:]
        days = model.fit_days(o)
        for k, r in enumerate(lrows):
            c, j = divmod(k, n_keep)
            u[c, j, o, : len(days)] = [float(r[2 + d - 1]) for d in days]
    iters = np.array([int(r["iter"]) for r in rows[:n_keep]])
    draws = mcmc.PosteriorDraws(
        model=model, config=scfg, par=par, u=u, w=np.ones_like(u), iters=iters,
        scales=np.zeros((len(chains), n_keep, 0)), accept=np.zeros((len(chains), 0)),
        latent_accept=np.zeros((len(chains), n_out, L)),
    )
    draws.derived = mcmc.derived_quantities(model, par)
    return cfg, draws


# --------------------------------------------------------------------------
# commands


def cmd_ingest(args, cfg):
    series = _load_input(args, cfg)
    _record_input(cfg, args)
    outs = Outputs(args.out)
    outs.write("series.csv", series_to_csv(series))
    outs.manifest(cfg)
    return EXIT_OK


def _fit_draws(args, cfg, series):
    model = _build_model(cfg, series)
    cfg["model_info"] = model.describe()
    return mcmc.run_chains(model, _sampler_config(cfg), n_jobs=cfg["run"]["jobs"])


def cmd_fit(args, cfg):
    series = _load_input(args, cfg)
    _record_input(cfg, args)
    cfg["model"] = "bivariate"
    outs = Outputs(args.out)
    draws = _fit_draws(args, cfg, series)
    m = draws.model.t_max
    bad = _write_fit(outs, draws, cfg, f"Richards fit, {cfg['run']['family']} errors, M={m}")
    outs.manifest(cfg)
    _check_convergence(bad, cfg)
    return EXIT_OK


def _forecast_inputs(args, cfg):
    if getattr(args, "run", None):
        run_cfg, draws = load_run(args.run)
        if args.input is None:
            args.input = run_cfg["input"]["path"]
        cfg["run_dir"] = str(args.run)
        for key in ("family", "growth", "m", "nu", "region", "negative_policy"):
            cfg["run"][key] = run_cfg["run"][key]
        cfg["run"]["m"] = draws.model.t_max
        series = _load_input(args, cfg)
        _record_input(cfg, args)
        return series, draws, []
    series = _load_input(args, cfg)
    _record_input(cfg, args)
    cfg["model"] = "bivariate"
    draws = _fit_draws(args, cfg, series)
    cfg["run"]["m"] = draws.model.t_max
    return series, draws, None


def _forecast_rng(cfg):
    # distinct stream from the sampler's chains
    return np.random.default_rng(np.random.SeedSequence([cfg["run"]["seed"], 1]))


def cmd_forecast(args, cfg):
    F = cfg["run"]["f"]
    if F < 1:
        raise ConfigError("--f must be >= 1")
    series, draws, _ = _forecast_inputs(args, cfg)
    outs = Outputs(args.out)
    bad = []
    if not getattr(args, "run", None):
        bad = _write_fit(outs, draws, cfg, f"Richards fit, {cfg['run']['family']} errors")
    paths = forecast.predict_paths(draws, series, draws.model.t_max, F, _forecast_rng(cfg))
    outs.write("forecast.csv", forecast.fan_to_csv(paths))
    outs.manifest(cfg)
    _check_convergence(bad, cfg)
    return EXIT_OK


def cmd_crossval(args, cfg):
    F = cfg["run"]["f"]
    if F < 1:
        raise ConfigError("--f must be >= 1")
    if not getattr(args, "run", None) and cfg["run"]["m"] is None:
        raise ConfigError("crossval needs --m")
    series, draws, _ = _forecast_inputs(args, cfg)
    M = draws.model.t_max
    if series.T < M + F:
        raise DataError(f"series ends at day {series.T}; crossval needs day {M + F}")
    outs = Outputs(args.out)
    bad = []
    if not getattr(args, "run", None):
        bad = _write_fit(outs, draws, cfg, f"Richards fit, {cfg['run']['family']} errors, M={M}")
    paths = forecast.predict_paths(draws, series, M, F, _forecast_rng(cfg))
    report = forecast.crossval(paths, series)
    outs.write("forecast.csv", forecast.fan_to_csv(paths))
    outs.write("crossval.csv", report.to_csv())
    outs.write("crossval.txt", report.to_text())
    outs.manifest(cfg)
    _check_convergence(bad, cfg)
    return EXIT_OK


def cmd_multiphase(args, cfg):
    if args.family is None and "family" not in _read_ini(args.config).get("run", {}):
        cfg["run"]["family"] = "pls"
    series = _load_input(args, cfg)
    _record_input(cfg, args)
    cfg["model"] = "phased"
    outs = Outputs(args.out)
    draws = _fit_draws(args, cfg, series)
    n = cfg["run"]["phases"]
    bad = _write_fit(outs, draws, cfg, f"{n}-phase Richards fit, {cfg['run']['family']} errors")
    curve = multiphase.posterior_mean_curve(draws)
    dates = [series.date_of(int(d)).isoformat() for d in curve["day"]]
    outs.write("curve.csv", _rows_csv(
        ["day", "date", "observed", "mu_mean", "rate_mean"],
        [(int(d), dt, int(y), f"{m:.6g}", f"{r:.6g}") for d, dt, y, m, r in
         zip(curve["day"], dates, curve["observed"], curve["mu_mean"], curve["rate_mean"])]))
    outs.manifest(cfg)
    _check_convergence(bad, cfg)
    return EXIT_OK


def _serial_interval(si_cfg) -> tuple[rtestim.SerialInterval, rtestim.GammaSI]:
    if si_cfg["components"]:
        path = Path(si_cfg["components"])
        if not path.is_file():
            raise ConfigError(f"serial-interval component file not found: {path}")
        g = rtestim.pool_si(rtestim.read_components(path.read_text()))
    elif si_cfg["quantiles"]:
        try:
            pairs = [tuple(float(x) for x in part.split(":"))
                     for part in str(si_cfg["quantiles"]).split(",")]
            (q1, q2) = pairs
        except ValueError as exc:
            raise ConfigError("--si-quantiles expects 'p1:v1,p2:v2'") from exc
        g = rtestim.gamma_from_quantiles(q1, q2)
    else:
        g = rtestim.gamma_from_mean_sd(float(si_cfg["mean"]), float(si_cfg["sd"]))
    return rtestim.discretize_si(g, int(si_cfg["J"]), bool(si_cfg["same_day"])), g


def cmd_rt(args, cfg):
    if not getattr(args, "run", None):
        raise ConfigError("rt needs --run pointing at a fit or multiphase output directory")
    run_cfg, draws = load_run(args.run)
    cfg["run_dir"] = str(args.run)
    cfg["input"] = run_cfg["input"]
    si, g = _serial_interval(cfg["si"])
    cfg["si_resolved"] = {"shape": g.shape, "rate": g.rate, "weights": si.weights.tolist()}
    pred = forecast.insample_predictions(draws, 0, _forecast_rng(cfg))
    rt = rtestim.effective_r(pred, si, draws.model.series.origin_date)
    outs = Outputs(args.out)
    outs.write("rt.csv", rt.to_csv())
    outs.manifest(cfg)
    return EXIT_OK


def _parse_phase(text):
    try:
        r, a, eta, kappa = (float(x) for x in text.split(","))
    except ValueError as exc:
        raise ConfigError("--phase expects r,a,eta,kappa") from exc
    return r, a, eta, kappa


def cmd_simulate(args, cfg):
    run = cfg["run"]
    fam = run["family"]
    sim = {k: getattr(args, k) for k in ("K", "r", "a", "lam", "sigma", "T", "c1", "phi",
                                         "r_d", "a_d", "death_start", "deterministic")}
    sim["phases"] = list(args.phase or [])
    cfg["simulate"] = sim
    if fam == "pg":
        err = ErrorSpec.pg(args.lam)
    else:
        err = ErrorSpec(fam, sigma=args.sigma, nu=run["nu"])
    g = GrowthParams(run["growth"], args.r, args.K, args.a)
    phases, K = [], args.K
    for text in args.phase or []:
        r2, a2, eta, kappa = _parse_phase(text)
        K = K * eta
        phases.append(Phase(GrowthParams(run["growth"], r2, K, a2), kappa))
    link = None
    if args.phi is not None:
        link = DeathLink(args.phi, args.r_d, args.a_d, start=args.death_start)
    spec = SimSpec(g, err, T=args.T, c_1=args.c1, death_link=link, phases=tuple(phases),
                   seed=run["seed"], deterministic=args.deterministic)
    series = simulate_epidemic(spec)
    outs = Outputs(args.out)
    outs.write("series.csv", series_to_csv(series))
    outs.manifest(cfg)
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest, "fit": cmd_fit, "forecast": cmd_forecast, "crossval": cmd_crossval,
    "multiphase": cmd_multiphase, "rt": cmd_rt, "simulate": cmd_simulate,
}


# --------------------------------------------------------------------------
# argument parsing


def _shared(p):
    p.add_argument("--input", help="ECDC-style CSV or a series CSV written by ingest")
    p.add_argument("--region", help="geoId to select from a multi-region file")
    p.add_argument("--m", type=int, help="training end day (default: last day)")
    p.add_argument("--f", type=int, help="forecast horizon in days (default 20)")
    p.add_argument("--family", choices=("pg", "pln", "pls"), help="overdispersion family")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--config", help="INI file with [run], [prior], [sampler], [si] sections")
    p.add_argument("--columns", help="date,cases,deaths[,region] column names of a raw CSV")
    p.add_argument("--growth", choices=FAMILIES, help="growth curve family")
    p.add_argument("--allow-negative-mean", action="store_true",
                   help="permit the Rosenzweig family in likelihoods")
    p.add_argument("--k-link", choices=("phi", "lognormal"), dest="k_link",
                   help="prior on final deaths")
    p.add_argument("--negative-policy", choices=("error", "clamp_zero"), dest="negative_policy")


def _sampler_flags(p):
    p.add_argument("--chains", type=int)
    p.add_argument("--iter", type=int, help="iterations per chain")
    p.add_argument("--burn-in", type=int, dest="burn_in")
    p.add_argument("--thin", type=int)
    p.add_argument("--jobs", type=int, help="worker processes for chains")
    p.add_argument("--allow-unconverged", action="store_true",
                   help="exit 0 even if some R-hat exceeds the threshold")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epirichards", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("ingest", help="parse and validate a raw CSV into a series CSV")
    _shared(p)
    p = sub.add_parser("fit", help="fit the bivariate cases/deaths model")
    _shared(p)
    _sampler_flags(p)
    for name, helptext in (("forecast", "posterior-predictive fan chart beyond M"),
                           ("crossval", "forecast and score against held-out days")):
        p = sub.add_parser(name, help=helptext)
        _shared(p)
        _sampler_flags(p)
        p.add_argument("--run", help="reuse draws from a fit output directory")
    p = sub.add_parser("multiphase", help="cases-only fit with latent switch days")
    _shared(p)
    _sampler_flags(p)
    p.add_argument("--phases", type=int, choices=(1, 2, 3))
    p = sub.add_parser("rt", help="effective reproduction ratio from a fitted run")
    _shared(p)
    p.add_argument("--run", help="fit or multiphase output directory")
    p.add_argument("--si-mean", type=float, dest="si_mean")
    p.add_argument("--si-sd", type=float, dest="si_sd")
    p.add_argument("--si-quantiles", dest="si_quantiles", help="p1:v1,p2:v2")
    p.add_argument("--si-components", dest="si_components",
                   help="file with one 'shape rate' gamma per line, pooled")
    p.add_argument("--si-J", type=int, dest="si_J", help="maximum lag (default 16)")
    p.add_argument("--no-same-day", action="store_true", dest="no_same_day",
                   help="drop the lag-0 serial-interval bin")
    p = sub.add_parser("simulate", help="write a synthetic series CSV")
    _shared(p)
    p.add_argument("--K", type=float, default=200000.0)
    p.add_argument("--r", type=float, default=0.25)
    p.add_argument("--a", type=float, default=0.5)
    p.add_argument("--lam", type=float, default=10.0, help="PG effect shape and rate")
    p.add_argument("--sigma", type=float, default=0.3, help="PLN/PLS effect scale")
    p.add_argument("--T", type=int, default=120)
    p.add_argument("--c1", type=int, default=1)
    p.add_argument("--phi", type=float, help="final deaths / final cases; omit for no deaths")
    p.add_argument("--r-d", type=float, default=0.25, dest="r_d")
    p.add_argument("--a-d", type=float, default=0.6, dest="a_d")
    p.add_argument("--death-start", type=int, default=30, dest="death_start")
    p.add_argument("--phase", action="append", help="extra phase r,a,eta,kappa (repeatable)")
    p.add_argument("--deterministic", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, SolverError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, DomainError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConvergenceFailure, InitializationError) as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
