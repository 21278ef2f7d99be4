import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epirichards.errors import ConfigError, DataError
from epirichards.forecast import (
    ForecastPaths,
    crossval,
    fan_to_csv,
    insample_predictions,
    mean_abs_deviation,
    predict_paths,
    score_outcome,
    verdict,
)
from epirichards.growth import GrowthParams, mean_incidence


def paths_from(new_c, new_d=None, M=10, start=(100.0, 10.0)):
    new = [np.asarray(new_c)]
    if new_d is not None:
        new.append(np.asarray(new_d))
    cum = [start[o] + np.cumsum(n, axis=1) for o, n in enumerate(new)]
    return ForecastPaths(M=M, F=new[0].shape[1], new=new, cum=cum, start=list(start[: len(new)]))


class TestPredictPaths:
    def test_deterministic_recursion(self, short_fit, ref_series):
        paths = predict_paths(short_fit, ref_series, F=15, deterministic=True)
        par = short_fit.flat_par()
        for s in (0, 57, 399):
            for o, (cum0, r, a, K) in enumerate([
                (ref_series.C[79], par[s, 0], par[s, 1], par[s, 2]),
                (ref_series.D[79], par[s, 3], par[s, 4], par[s, 5]),
            ]):
                p = GrowthParams("richards", r, K, a)
                C = float(cum0)
                expect = []
                for _ in range(15):
                    n = int(np.rint(mean_incidence(p, C)))
                    expect.append(n)
                    C += n
                np.testing.assert_array_equal(paths.new[o][s], expect)

    def test_saturated_draw(self, short_fit, ref_series):
        par = short_fit.par.copy()
        par[..., 2] = ref_series.C[79]
        d = dataclasses.replace(short_fit, par=par)
        paths = predict_paths(d, ref_series, F=10, rng=0)
        np.testing.assert_array_equal(paths.new[0], 0)

    def test_telescoping(self, short_fit, ref_series):
        paths = predict_paths(short_fit, ref_series, F=20, rng=3)
        for o, start in enumerate((ref_series.C[79], ref_series.D[79])):
            np.testing.assert_array_equal(paths.cum[o][:, -1], start + paths.new[o].sum(axis=1))
            np.testing.assert_array_equal(np.diff(paths.cum[o], axis=1), paths.new[o][:, 1:])
        p = paths[5]
        assert p.draw_id == 5 and p.C_new[0] == ref_series.C[79] + p.c_new[0]

    def test_reproducible(self, short_fit, ref_series):
        a = predict_paths(short_fit, ref_series, F=20, rng=9)
        b = predict_paths(short_fit, ref_series, F=20, rng=9)
        np.testing.assert_array_equal(a.new[0], b.new[0])
        np.testing.assert_array_equal(a.new[1], b.new[1])

    def test_zero_horizon(self, short_fit, ref_series):
        with pytest.raises(ConfigError):
            predict_paths(short_fit, ref_series, F=0)

    def test_wrong_training_end(self, short_fit, ref_series):
        with pytest.raises(ConfigError):
            predict_paths(short_fit, ref_series, M=90)

    def test_fan_csv(self, short_fit, ref_series):
        text = fan_to_csv(predict_paths(short_fit, ref_series, F=5, rng=1))
        header = text.splitlines()[0].split(",")
        assert header[:2] == ["day", "date"]
        for col in ("new_cases_mean", "new_cases_q2.5", "cum_deaths_q97.5", "new_deaths_q50"):
            assert col in header
        assert len(text.splitlines()) == 6


class TestCrossval:
    def test_all_over(self):
        rep = crossval(paths_from(np.full((50, 20), 100)), {"c": np.full(20, 50)})
        assert rep.omega_c == 1.0 and rep.scores[0].verdict == "over"

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        x = rng.normal(0, 5, (500, 1))
        sym = 50 + np.concatenate([x, -x])
        rep = crossval(paths_from(np.repeat(sym, 20, axis=1)), {"c": np.full(20, 50)})
        np.testing.assert_allclose(rep.omega_c, 0.5, atol=1e-12)
        assert rep.scores[0].verdict == "satisfactory"

    def test_ties_not_overpredicting(self):
        assert score_outcome(np.full((10, 4), 5.0), np.full(4, 5.0)).omega == 0.0

    def test_verdict_thresholds(self):
        assert [verdict(w) for w in (0.0, 0.05, 0.051, 0.949, 0.95, 1.0)] == [
            "under", "under", "satisfactory", "satisfactory", "over", "over"]

    def test_empty_paths(self):
        with pytest.raises(ConfigError):
            crossval(paths_from(np.zeros((0, 20))), {"c": np.zeros(20)})

    def test_horizon_beyond_data(self, short_fit, ref_series):
        paths = predict_paths(short_fit, ref_series, F=20, rng=0)
        with pytest.raises(DataError):
            crossval(paths, ref_series.truncate(90))

    def test_heldout_length(self):
        with pytest.raises(DataError):
            crossval(paths_from(np.zeros((5, 20))), {"c": np.zeros(19)})

    def test_report_outputs(self, short_fit, ref_series):
        rep = crossval(predict_paths(short_fit, ref_series, F=20, rng=0), ref_series)
        assert rep.omega_d is not None
        lines = rep.to_csv().splitlines()
        assert lines[0].startswith("outcome,M,F,omega")
        assert [l.split(",")[0] for l in lines[1:]] == ["cases", "deaths"]
        assert "training to day 80" in rep.to_text()
        s = rep.scores[0]
        assert s.covered == (s.pred_lo <= s.actual <= s.pred_hi)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.0, 50.0))
    def test_shift_monotone(self, seed, shift):
        rng = np.random.default_rng(seed)
        pred = rng.poisson(40, size=(200, 20))
        actual = rng.poisson(40, size=20)
        assert score_outcome(pred + shift, actual).omega >= score_outcome(pred, actual).omega

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_permutation_invariant(self, seed):
        rng = np.random.default_rng(seed)
        pred = rng.poisson(40, size=(100, 20))
        actual = rng.poisson(40, size=20)
        base = score_outcome(pred, actual).omega
        perm = pred[rng.permutation(100)][:, rng.permutation(20)]
        assert score_outcome(perm, actual[rng.permutation(20)]).omega == base


class TestInSample:
    def test_day_one_observed(self, short_fit, ref_series):
        pred = insample_predictions(short_fit, 0, rng=0)
        assert pred.shape == (400, 80)
        np.testing.assert_array_equal(pred[:, 0], np.full(400, ref_series.c[0]))

    def test_unfitted_death_days_observed(self, short_fit, ref_series):
        pred = insample_predictions(short_fit, 1, rng=0)
        first = np.nonzero(ref_series.D > 0)[0][0]
        np.testing.assert_array_equal(pred[:, : first + 1],
                                      np.broadcast_to(ref_series.d[: first + 1], (400, first + 1)))

    def test_rate_mode_positive(self, short_fit):
        pred = insample_predictions(short_fit, 0, replicate=False)
        assert np.all(pred[:, 1:] > 0)

    def test_mean_abs_deviation(self, short_fit):
        # in-sample rates track counts closely because effects absorb noise
        mad = mean_abs_deviation(short_fit, 0)
        y = short_fit.model.y[0, : short_fit.model.nobs[0]]
        assert 0 <= mad < 0.1 * y.mean()
