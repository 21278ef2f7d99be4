"""Shared fixtures: simulated reference epidemics and one short fit reused
by the forecast, WAIC and R_t tests."""

import datetime as dt

import numpy as np
import pytest

from epirichards.data import EpidemicSeries
from epirichards.errmodel import ErrorSpec
from epirichards.growth import GrowthParams
from epirichards.mcmc import SamplerConfig, build_bivariate, run_chains
from epirichards.prior import PriorConfig
from epirichards.simulate import DeathLink, SimSpec, simulate_epidemic

REF_GROWTH = GrowthParams("richards", r=0.25, K=200000.0, a=0.5)
REF_DEATHS = DeathLink(phi=0.1, r=0.25, a=0.6, start=35)


def reference_spec(seed=0, T=120, error=None, **kw):
    return SimSpec(REF_GROWTH, error or ErrorSpec.pg(10.0), T=T, death_link=REF_DEATHS,
                   seed=seed, **kw)


def logistic_cumulative(K, r, tau, t):
    return K / (1.0 + np.exp(-r * (np.asarray(t, dtype=float) - tau)))


@pytest.fixture(scope="session")
def ref_series():
    return simulate_epidemic(reference_spec(seed=3))


@pytest.fixture(scope="session")
def short_fit(ref_series):
    """PG fit to days 1..80 of the reference epidemic (short chains)."""
    model = build_bivariate(ref_series, t_max=80, prior=PriorConfig())
    cfg = SamplerConfig(n_chains=2, n_iter=4000, thin=10, seed=11)
    return run_chains(model, cfg)


@pytest.fixture
def tiny_series():
    c = np.array([2, 0, 0, 1])
    d = np.array([0, 0, 0, 0])
    return EpidemicSeries(c, d, dt.date(2020, 2, 1))


ACCEPTANCE_LINES = []


def record_acceptance(criterion, ok, detail=""):
    """Queue one PASS/FAIL line for the terminal summary."""
    status = "PASS" if ok else "FAIL"
    if ok is None:
        status = "SKIP"
    line = f"[{status}] criterion {criterion}" + (f": {detail}" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
