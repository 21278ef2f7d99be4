import json

import numpy as np
import pytest

from epirichards.cli import load_run, main
from epirichards.data import load_series

FAST = ["--iter", "1200", "--thin", "4", "--allow-unconverged"]


def read_dir(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["simulate", "--T", "110", "--phi", "0.1", "--death-start", "35",
                 "--seed", "3", "--out", str(root / "sim")]) == 0
    assert main(["fit", "--input", str(root / "sim" / "series.csv"), "--m", "80",
                 "--seed", "1", "--out", str(root / "fit"), *FAST]) == 0
    return root


class TestIngest:
    def test_ecdc_feed(self, tmp_path):
        raw = tmp_path / "feed.csv"
        raw.write_text(
            "dateRep,cases,deaths,geoId\n"
            "03/02/2020,1,0,UK\n01/02/2020,2,0,UK\n02/02/2020,0,0,UK\n"
            "05/02/2020,3,1,UK\n01/02/2020,7,0,FR\n"
        )
        assert main(["ingest", "--input", str(raw), "--region", "UK",
                     "--out", str(tmp_path / "out")]) == 0
        s = load_series(tmp_path / "out" / "series.csv")
        np.testing.assert_array_equal(s.c, [2, 0, 1, 0, 3])
        np.testing.assert_array_equal(s.D, [0, 0, 0, 0, 1])

    def test_custom_columns(self, tmp_path):
        raw = tmp_path / "feed.csv"
        raw.write_text("day,n,k\n2020-02-01,2,0\n2020-02-02,1,0\n2020-02-03,4,1\n")
        assert main(["ingest", "--input", str(raw), "--columns", "day,n,k",
                     "--out", str(tmp_path / "out")]) == 0

    def test_negative_count_exit(self, tmp_path):
        raw = tmp_path / "feed.csv"
        raw.write_text("dateRep,cases,deaths,geoId\n01/02/2020,2,0,UK\n"
                       "02/02/2020,-1,0,UK\n03/02/2020,1,0,UK\n")
        assert main(["ingest", "--input", str(raw), "--out", str(tmp_path / "o")]) == 3
        assert main(["ingest", "--input", str(raw), "--negative-policy", "clamp_zero",
                     "--out", str(tmp_path / "o")]) == 0


class TestErrors:
    def test_short_series(self, tmp_path):
        raw = tmp_path / "short.csv"
        raw.write_text("dateRep,cases,deaths,geoId\n01/02/2020,2,0,UK\n02/02/2020,1,0,UK\n")
        assert main(["fit", "--input", str(raw), "--out", str(tmp_path / "o"), *FAST]) == 3

    def test_missing_input(self, tmp_path):
        assert main(["fit", "--input", str(tmp_path / "nope.csv"),
                     "--out", str(tmp_path / "o")]) == 2

    def test_zero_horizon(self, workdir, tmp_path):
        assert main(["forecast", "--run", str(workdir / "fit"), "--f", "0",
                     "--out", str(tmp_path / "o")]) == 2

    def test_crossval_beyond_data(self, workdir, tmp_path):
        assert main(["crossval", "--run", str(workdir / "fit"), "--f", "40",
                     "--out", str(tmp_path / "o")]) == 3

    def test_rt_needs_run(self, tmp_path):
        assert main(["rt", "--out", str(tmp_path / "o")]) == 2

    def test_rt_missing_artifact(self, tmp_path):
        (tmp_path / "empty").mkdir()
        assert main(["rt", "--run", str(tmp_path / "empty"), "--out", str(tmp_path / "o")]) == 2

    def test_unconverged_exit(self, workdir, tmp_path):
        code = main(["fit", "--input", str(workdir / "sim" / "series.csv"), "--m", "80",
                     "--iter", "200", "--thin", "1", "--out", str(tmp_path / "o")])
        assert code == 4
        assert (tmp_path / "o" / "rhat.csv").exists()


class TestFitOutputs:
    def test_files(self, workdir):
        names = set(read_dir(workdir / "fit"))
        assert {"draws.csv", "summary.csv", "waic.csv", "rhat.csv", "summary.txt",
                "manifest.json", "latents_cases.csv", "latents_deaths.csv"} <= names

    def test_summary_rows(self, workdir):
        lines = (workdir / "fit" / "summary.csv").read_text().splitlines()
        assert lines[0] == "parameter,mean,q2.5,median,q97.5"
        assert [l.split(",")[0] for l in lines[1:10]] == [
            "K_c", "K_d", "r_c", "r_d", "a_c", "a_d", "Phi", "tau_c", "tau_d"]

    def test_waic_layout(self, workdir):
        rows = [l.split(",") for l in (workdir / "fit" / "waic.csv").read_text().splitlines()]
        assert [r[0] for r in rows[1:]] == ["cases", "deaths", "total"]
        np.testing.assert_allclose(float(rows[3][-1]), float(rows[1][-1]) + float(rows[2][-1]),
                                   rtol=1e-5)

    def test_manifest(self, workdir):
        man = json.loads((workdir / "fit" / "manifest.json").read_text())
        assert man["command"] == "fit" and man["run"]["seed"] == 1
        assert len(man["input"]["sha256"]) == 64
        assert man["sampler"]["n_iter"] == 1200

    def test_load_run_roundtrip(self, workdir):
        cfg, draws = load_run(workdir / "fit")
        assert cfg["command"] == "fit"
        assert draws.par.shape[:2] == (2, 150)
        assert draws.model.series.T == 110 and draws.model.t_max == 80


class TestConfigPrecedence:
    def test_ini_then_flag(self, workdir, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text("[run]\nseed = 7\nm = 70\n[prior]\ncfr_ref = 0.2\n"
                       "[sampler]\nn_iter = 1000\nthin = 5\n")
        out = tmp_path / "o"
        assert main(["fit", "--input", str(workdir / "sim" / "series.csv"), "--config", str(ini),
                     "--m", "75", "--allow-unconverged", "--out", str(out)]) == 0
        man = json.loads((out / "manifest.json").read_text())
        assert man["run"]["seed"] == 7 and man["run"]["m"] == 75
        assert man["prior"]["cfr_ref"] == 0.2 and man["sampler"]["n_iter"] == 1000


class TestCommands:
    def test_forecast_and_crossval(self, workdir, tmp_path):
        assert main(["forecast", "--run", str(workdir / "fit"), "--f", "10",
                     "--out", str(tmp_path / "fc")]) == 0
        assert len((tmp_path / "fc" / "forecast.csv").read_text().splitlines()) == 11
        assert main(["crossval", "--run", str(workdir / "fit"), "--out", str(tmp_path / "cv")]) == 0
        text = (tmp_path / "cv" / "crossval.txt").read_text()
        assert "omega" in text

    def test_rt_from_fit(self, workdir, tmp_path):
        out = tmp_path / "rt"
        assert main(["rt", "--run", str(workdir / "fit"), "--si-mean", "4", "--si-sd", "2",
                     "--out", str(out)]) == 0
        lines = (out / "rt.csv").read_text().splitlines()
        assert lines[0] == "day,date,Rt_mean,Rt_lo,Rt_hi,Rt_ma5,sig_above_1"
        assert len(lines) == 1 + 80 - 16

    def test_rt_si_quantiles(self, workdir, tmp_path):
        assert main(["rt", "--run", str(workdir / "fit"), "--si-quantiles", "0.25:1.5,0.75:4.5",
                     "--si-J", "12", "--out", str(tmp_path / "rt")]) == 0

    def test_multiphase(self, workdir, tmp_path):
        out = tmp_path / "mp"
        assert main(["multiphase", "--input", str(workdir / "sim" / "series.csv"),
                     "--phases", "2", "--out", str(out), *FAST]) == 0
        assert (out / "curve.csv").exists()
        assert main(["rt", "--run", str(out), "--out", str(tmp_path / "rt")]) == 0

    def test_simulate_phases(self, tmp_path):
        out = tmp_path / "s"
        assert main(["simulate", "--T", "60", "--phase", "0.1,1.0,1.5,40", "--deterministic",
                     "--out", str(out)]) == 0
        s = load_series(out / "series.csv")
        assert s.T == 60 and s.D[-1] == 0


class TestDeterminism:
    def test_fit_byte_identical(self, workdir, tmp_path):
        args = ["fit", "--input", str(workdir / "sim" / "series.csv"), "--m", "80",
                "--family", "pls", "--seed", "4", *FAST]
        assert main([*args, "--out", str(tmp_path / "a")]) == 0
        assert main([*args, "--out", str(tmp_path / "b")]) == 0
        assert read_dir(tmp_path / "a") == read_dir(tmp_path / "b")

    def test_crossval_byte_identical(self, workdir, tmp_path):
        for name in ("a", "b"):
            assert main(["crossval", "--run", str(workdir / "fit"), "--seed", "2",
                         "--out", str(tmp_path / name)]) == 0
        assert read_dir(tmp_path / "a") == read_dir(tmp_path / "b")
