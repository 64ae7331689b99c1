"""CLI tests: file contracts, strict config validation, and equality between
command outputs and the in-process pipeline under the same seed."""

import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from esboot import cli, es_estimation, qmle, rng, volatility
from esboot.cli import STUDY_HEADER, _fmt, _json_text, _read_returns, main
from esboot.distributions import student_t
from esboot.volatility import GarchParams

THETA = {"omega": 0.079365, "alpha": 0.15, "beta": 0.8}
DIST_T6 = {"kind": "student_t", "nu": 6}


def write_config(tmp_path, obj, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def simulate_file(tmp_path, n=300, seed=4, sub="sim"):
    cfg = write_config(tmp_path, {"theta0": THETA, "dist": DIST_T6,
                                  "n": n, "burn_in": 200, "seed": seed},
                       name="sim-%s.json" % sub)
    out = tmp_path / sub
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    return str(out / "simulated.csv")


class TestSimulate:
    def test_file_contract(self, tmp_path, capsys):
        n = 80
        cfg = write_config(tmp_path, {"theta0": THETA, "dist": DIST_T6,
                                      "n": n, "burn_in": 100, "seed": 1})
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 0
        out = str(tmp_path / "simulated.csv")
        assert capsys.readouterr().out.strip() == out

        header, rows = read_csv(out)
        assert header == ["t", "epsilon", "sigma2_true"]
        assert len(rows) == n + 1
        assert [int(r[0]) for r in rows] == list(range(1, n + 2))
        for r in rows[:n]:
            float(r[1])
            assert float(r[2]) > 0.0
        # the trailer row carries only the one-step-ahead variance
        assert rows[n][1] == ""
        assert float(rows[n][2]) > 0.0

    def test_deterministic(self, tmp_path):
        a = simulate_file(tmp_path, n=60, seed=9, sub="a")
        b = simulate_file(tmp_path, n=60, seed=9, sub="b")
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg = write_config(tmp_path, {"theta0": THETA, "dist": DIST_T6,
                                      "n": 60, "burn_in": 200, "seed": 1})
        out_a = tmp_path / "flag"
        assert main(["simulate", "--config", cfg, "--seed", "9",
                     "--out", str(out_a)]) == 0
        b = simulate_file(tmp_path, n=60, seed=9, sub="cfg")
        assert (out_a / "simulated.csv").read_bytes() == open(b, "rb").read()

    def test_matches_library_stream(self, tmp_path):
        path = simulate_file(tmp_path, n=50, seed=3)
        eps = _read_returns(path)
        ref, _ = volatility.simulate(
            GarchParams(**THETA), student_t(6.0), 50, 200,
            rng.stream(3, "simulate", 0),
        )
        assert np.array_equal(eps, ref)


class TestValidation:
    def run_expecting_error(self, args, capsys, needle=None):
        assert main(args) == 1
        err = capsys.readouterr().err
        assert err.startswith("esboot: error:")
        if needle is not None:
            assert needle in err
        return err

    def test_nonstationary_dgp_named(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"theta0": {"omega": 0.1, "alpha": 0.5, "beta": 0.5},
                                      "dist": DIST_T6, "n": 60})
        self.run_expecting_error(
            ["simulate", "--config", cfg, "--out", str(tmp_path)],
            capsys, "alpha + beta < 1",
        )

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"theta0": THETA, "dist": DIST_T6,
                                      "n": 60, "bandwidth": 2})
        self.run_expecting_error(
            ["simulate", "--config", cfg, "--out", str(tmp_path)],
            capsys, "unknown key(s) ['bandwidth']",
        )

    def test_missing_key_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"theta0": THETA, "dist": DIST_T6})
        self.run_expecting_error(
            ["simulate", "--config", cfg, "--out", str(tmp_path)],
            capsys, "missing required key(s) ['n']",
        )

    def test_nu_on_normal_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"theta0": THETA,
                                      "dist": {"kind": "normal", "nu": 6},
                                      "n": 60})
        self.run_expecting_error(
            ["simulate", "--config", cfg, "--out", str(tmp_path)], capsys, "nu")

    def test_malformed_json(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        self.run_expecting_error(
            ["simulate", "--config", str(path), "--out", str(tmp_path)],
            capsys, "not valid JSON")

    def test_non_object_root(self, tmp_path, capsys):
        path = tmp_path / "list.json"
        path.write_text("[1, 2]")
        self.run_expecting_error(
            ["simulate", "--config", str(path), "--out", str(tmp_path)],
            capsys, "JSON object")

    def test_missing_config_file(self, tmp_path, capsys):
        self.run_expecting_error(
            ["simulate", "--config", str(tmp_path / "nope.json"),
             "--out", str(tmp_path)], capsys)

    def test_workers_guard(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"theta0": THETA, "dist": DIST_T6, "n": 60})
        self.run_expecting_error(
            ["simulate", "--config", cfg, "--workers", "0",
             "--out", str(tmp_path)], capsys, "--workers")

    def test_too_short_series_for_fit(self, tmp_path, capsys):
        path = simulate_file(tmp_path, n=30, seed=2, sub="short")
        cfg = write_config(tmp_path, {"input": path}, name="fit.json.cfg")
        self.run_expecting_error(
            ["fit", "--config", cfg, "--out", str(tmp_path)], capsys)

    def test_no_subcommand_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2


class TestFitAndEs:
    def test_fit_matches_library(self, tmp_path):
        path = simulate_file(tmp_path, n=400, seed=11)
        cfg = write_config(tmp_path, {"input": path}, name="fit-cfg.json")
        assert main(["fit", "--config", cfg, "--out", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "fit.json").read_text())

        fit = qmle.fit(_read_returns(path))
        assert doc["theta_hat"]["omega"] == fit.theta_hat.omega
        assert doc["theta_hat"]["alpha"] == fit.theta_hat.alpha
        assert doc["theta_hat"]["beta"] == fit.theta_hat.beta
        assert doc["loglik"] == fit.loglik
        assert doc["converged"] is True
        assert doc["n"] == 400

    def test_es_matches_library(self, tmp_path):
        path = simulate_file(tmp_path, n=400, seed=12)
        cfg = write_config(tmp_path, {"input": path, "alpha": 0.05,
                                      "gamma": 0.10}, name="es-cfg.json")
        assert main(["es", "--config", cfg, "--out", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "es.json").read_text())

        fit = qmle.fit(_read_returns(path))
        es = es_estimation.conditional_es(fit, 0.05)
        gh = es_estimation.gamma_hat(fit, 0.05)
        lo, hi = es_estimation.asymptotic_interval(fit, es, gh, 0.10)
        assert doc["es"]["es_hat"] == es.es_hat
        assert doc["es"]["mu_hat"] == es.mu_hat
        assert doc["es"]["tail_count"] == es.tail_count
        assert doc["gamma_hat"]["nu_alpha_hat"] == gh.nu_alpha_hat
        got_gamma = np.array(doc["gamma_hat"]["Gamma"])
        assert got_gamma.shape == (4, 4)
        assert np.array_equal(got_gamma, gh.Gamma)
        assert doc["asymptotic_interval"]["lo"] == lo
        assert doc["asymptotic_interval"]["hi"] == hi
        assert lo <= es.es_hat <= hi


@pytest.fixture(scope="module")
def outputs(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("bootcmd")
    path = simulate_file(tmp_path, n=300, seed=13)
    cfg = write_config(tmp_path, {"input": path, "alpha": 0.05,
                                  "gamma": 0.10, "B": 100, "seed": 5},
                       name="boot-cfg.json")
    assert main(["bootstrap", "--config", cfg, "--out", str(tmp_path)]) == 0
    return tmp_path, cfg


class TestBootstrapCmd:
    def test_interval_identities_survive_serialization(self, outputs):
        tmp_path, _ = outputs
        doc = json.loads((tmp_path / "bootstrap.json").read_text())
        ivs = doc["intervals"]
        assert ivs["ep"]["length"] == ivs["rt"]["length"]
        es_hat = doc["es_hat"]
        assert ivs["sy"]["hi"] - es_hat == es_hat - ivs["sy"]["lo"]
        for k in ("ep", "rt", "sy"):
            assert ivs[k]["lo"] < ivs[k]["hi"]
        assert doc["B"] == 100 and doc["B_effective"] <= 100

    def test_replicates_csv(self, outputs):
        tmp_path, _ = outputs
        header, rows = read_csv(tmp_path / "replicates.csv")
        assert header == ["b", "converged", "omega_star", "alpha_star",
                          "beta_star", "mu_star", "es_star"]
        assert len(rows) == 100
        assert [int(r[0]) for r in rows] == list(range(100))
        for r in rows:
            assert r[1] in ("0", "1")
            assert float(r[5]) > 0.0 and float(r[6]) > 0.0

    def test_worker_invariance(self, outputs):
        tmp_path, cfg = outputs
        again = tmp_path / "again"
        assert main(["bootstrap", "--config", cfg, "--workers", "3",
                     "--out", str(again)]) == 0
        assert (again / "bootstrap.json").read_bytes() == \
            (tmp_path / "bootstrap.json").read_bytes()
        assert (again / "replicates.csv").read_bytes() == \
            (tmp_path / "replicates.csv").read_bytes()


def study_scenario(n=300, S=8, B=100, label="tiny", alpha=0.05):
    return {"label": label, "theta0": THETA, "dist": DIST_T6, "alpha": alpha,
            "n": n, "gamma": 0.10, "B": B, "S": S, "burn_in": 200, "seed": 21}


class TestStudyCmd:
    def test_study_csv_contract(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"scenarios": [study_scenario()]})
        assert main(["study", "--config", cfg, "--out", str(tmp_path)]) == 0
        printed = capsys.readouterr()
        assert "done: tiny" in printed.err

        header, rows = read_csv(tmp_path / "study.csv")
        assert header == STUDY_HEADER
        assert [r[2] for r in rows] == ["EP", "RT", "SY"]
        for r in rows:
            assert r[0] == "tiny" and int(r[1]) == 300
            total = float(r[3]) + float(r[4]) + float(r[5])
            assert total == 100.0
            assert float(r[6]) > 0.0
            assert int(r[7]) >= 0

        header2, rows2 = read_csv(tmp_path / "study_asym.csv")
        assert header2 == STUDY_HEADER
        assert [r[2] for r in rows2] == ["ASYM"]

    def test_multiple_scenarios_in_order(self, tmp_path):
        cfg = write_config(tmp_path, {"scenarios": [
            study_scenario(label="one"),
            study_scenario(label="two", alpha=0.10),
        ]})
        assert main(["study", "--config", cfg, "--out", str(tmp_path)]) == 0
        _, rows = read_csv(tmp_path / "study.csv")
        assert [r[0] for r in rows] == ["one"] * 3 + ["two"] * 3

    def test_full_scale_flag_sets_sizes(self):
        sc = cli._parse_scenario(study_scenario(), "w", None, True)
        assert sc.S == cli.FULL_SCALE_SIZE and sc.B == cli.FULL_SCALE_SIZE
        sc = cli._parse_scenario(study_scenario(), "w", None, False)
        assert sc.S == 8 and sc.B == 100

    def test_seed_flag_overrides_scenario_seed(self):
        sc = cli._parse_scenario(study_scenario(), "w", 99, False)
        assert sc.master_seed == 99


class TestDensityCmd:
    def test_outputs(self, tmp_path):
        cfg = write_config(tmp_path, {"scenario": study_scenario(S=40),
                                      "n_grid": 64})
        assert main(["density", "--config", cfg, "--out", str(tmp_path)]) == 0

        header, rows = read_csv(tmp_path / "density.csv")
        assert header == ["x", "mc_density", "bootstrap_density"]
        assert len(rows) == 64
        xs = [float(r[0]) for r in rows]
        assert xs == sorted(xs)
        assert all(float(r[1]) >= 0.0 and float(r[2]) >= 0.0 for r in rows)

        doc = json.loads((tmp_path / "density.json").read_text())
        assert 0.0 <= doc["ks_distance"] <= 1.0
        assert doc["n_sim_values"] >= 30
        assert doc["sim_bandwidth"] > 0.0


class TestSerialization:
    def test_fmt_round_trips(self):
        for v in (1 / 3, 0.1, math.pi, 1e-300, 1e300, -2.5, 0.0,
                  4.9406564584124654e-324):
            assert float(_fmt(v)) == v

    def test_fmt_rejects_non_finite(self):
        for v in (math.inf, -math.inf, math.nan):
            with pytest.raises(ValueError):
                _fmt(v)

    def test_json_text_round_trips(self):
        doc = {"a": 1 / 3, "b": [1, 2.5, None, True],
               "c": {"d": np.array([0.1, 0.2])}, "e": "x\"y"}
        parsed = json.loads(_json_text(doc))
        assert parsed["a"] == 1 / 3
        assert parsed["b"] == [1, 2.5, None, True]
        assert parsed["c"]["d"] == [0.1, 0.2]
        assert parsed["e"] == 'x"y'

    def test_read_returns_epsilon_column(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("t,epsilon,sigma2_true\n1,0.5,1.0\n2,-0.25,1.1\n3,,1.2\n")
        assert np.array_equal(_read_returns(str(path)), [0.5, -0.25])

    def test_read_returns_single_column(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("returns\n0.5\n-0.25\n")
        assert np.array_equal(_read_returns(str(path)), [0.5, -0.25])

    def test_read_returns_rejects_ambiguous(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(cli.ConfigError):
            _read_returns(str(path))


class TestConsoleScript:
    def test_help_runs(self):
        proc = subprocess.run(["esboot", "--help"], capture_output=True,
                              text=True, timeout=120)
        assert proc.returncode == 0
        assert "simulate" in proc.stdout and "bootstrap" in proc.stdout
