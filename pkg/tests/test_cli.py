"""End-to-end checks of the command line: exit codes, artifacts, report schema."""

import csv
import json

import numpy as np
import pytest

from mocure.cli import build_parser, config_from_args, main
from mocure.dataio import save_dataset
from mocure.regression import Family, RegressionCoefficients
from mocure.simulation import SimConfig, generate_dataset

MO_TRUTH = RegressionCoefficients(
    a=np.array([-1.2, 0.5, 0.2]), b=np.array([-1.1, 1.5, 0.9]), tilt=2.0
)

REPORT_KEYS = {
    "input", "family", "engine", "seed", "level", "n_obs", "censoring_pct",
    "frequentist", "bayesian", "cure_fractions", "criteria", "lr_test_vs_base",
    "influence", "artifacts", "exit_status",
}
FREQ_CRITERIA = ("aicc", "bic", "hqic", "caic")
BAYES_CRITERIA = ("lpml", "dic", "waic", "minus2_lpml", "minus2_waic")


def make_csv(path, n=120, seed=11, stratum=False):
    config = SimConfig(
        family=Family.MO_GOMPERTZ,
        true_coefficients=MO_TRUTH,
        n=n,
        replicates=1,
        seed=seed,
    )
    data = generate_dataset(config, rep_seed=0)
    save_dataset(data, path, ("x11", "x12"), ("x21", "x22"))
    if stratum:
        lines = path.read_text(encoding="utf-8").splitlines()
        lines[0] += ",arm"
        for i in range(1, len(lines)):
            lines[i] += ",treat" if data.X.x1[i - 1, 1] > 0 else ",control"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return data


def read_report(out_dir):
    return json.loads((out_dir / "report.json").read_text(encoding="utf-8"))


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def freq_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("freq")
    data = make_csv(root / "data.csv", stratum=True)
    out = root / "out"
    code = main([
        "fit", str(root / "data.csv"),
        "--family", "mo-gompertz",
        "--alpha-covariates", "x11,x12",
        "--beta-covariates", "x21,x22",
        "--stratum", "arm",
        "--out", str(out),
    ])
    return code, out, data


@pytest.fixture(scope="module")
def bayes_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("bayes")
    make_csv(root / "data.csv", n=60, seed=3)
    out = root / "out"
    # a chain this short cannot pass the convergence gates
    code = main([
        "fit", str(root / "data.csv"),
        "--family", "gompertz",
        "--alpha-covariates", "x11,x12",
        "--beta-covariates", "x21,x22",
        "--engine", "bayes",
        "--iters", "1300",
        "--burnin", "100",
        "--out", str(out),
    ])
    return code, out


class TestFrequentistRun:
    def test_exit_code_clean(self, freq_run):
        code, _, _ = freq_run
        assert code == 0

    def test_all_artifacts_written(self, freq_run):
        _, out, _ = freq_run
        for name in ("report.json", "residuals.csv", "km_overlay.csv",
                     "summary.txt"):
            assert (out / name).exists()
        assert not (out / "influence.csv").exists()

    def test_report_schema_stable(self, freq_run):
        _, out, _ = freq_run
        report = read_report(out)
        assert set(report) == REPORT_KEYS
        assert report["engine"] == "frequentist"
        assert report["bayesian"] is None
        assert report["influence"] is None
        assert report["exit_status"] == 0
        assert report["artifacts"]["influence"] is None

    def test_criteria_block_has_explicit_nulls(self, freq_run):
        _, out, _ = freq_run
        crit = read_report(out)["criteria"]
        for key in FREQ_CRITERIA:
            assert isinstance(crit[key], float)
        for key in BAYES_CRITERIA:
            assert crit[key] is None

    def test_estimates_rows_named(self, freq_run):
        _, out, _ = freq_run
        freq = read_report(out)["frequentist"]
        assert freq["converged"] is True
        names = [row["name"] for row in freq["estimates"]]
        assert names == ["alpha:intercept", "alpha:x11", "alpha:x12",
                         "beta:intercept", "beta:x21", "beta:x22", "tilt"]
        for row in freq["estimates"]:
            assert row["se"] is None or row["se"] >= 0.0

    def test_lr_block_present_for_tilted_family(self, freq_run):
        _, out, _ = freq_run
        lr = read_report(out)["lr_test_vs_base"]
        assert lr["base_family"] == "gompertz"
        assert lr["df"] == 1
        assert lr["statistic"] >= 0.0
        assert 0.0 <= lr["p_value"] <= 1.0

    def test_cure_fraction_rows_cover_strata(self, freq_run):
        _, out, data = freq_run
        rows = read_report(out)["cure_fractions"]
        assert [r["stratum"] for r in rows] == ["all", "control", "treat"]
        assert rows[0]["count"] == data.n_obs
        assert rows[1]["count"] + rows[2]["count"] == data.n_obs
        for row in rows:
            assert 0.0 < row["mean_cure"] < 1.0

    def test_residual_rows_align_with_data(self, freq_run):
        _, out, data = freq_run
        rows = read_rows(out / "residuals.csv")
        assert len(rows) == data.n_obs
        assert list(rows[0]) == ["index", "time", "event", "martingale",
                                 "deviance"]
        t = np.array([float(r["time"]) for r in rows])
        np.testing.assert_array_equal(t, data.t)
        for row in rows:
            assert float(row["martingale"]) <= float(row["event"])

    def test_overlay_has_km_and_model_per_stratum(self, freq_run):
        _, out, _ = freq_run
        rows = read_rows(out / "km_overlay.csv")
        seen = {(r["stratum"], r["series"]) for r in rows}
        assert seen == {
            ("control", "kaplan_meier"), ("control", "model"),
            ("treat", "kaplan_meier"), ("treat", "model"),
        }

    def test_summary_text_readable(self, freq_run):
        _, out, _ = freq_run
        text = (out / "summary.txt").read_text(encoding="utf-8")
        assert "maximum likelihood" in text
        assert "tilt" in text
        assert "LR test against gompertz" in text
        assert "cure fraction" in text

    def test_report_floats_roundtrip(self, freq_run):
        _, out, _ = freq_run
        report = read_report(out)
        loglik = report["frequentist"]["loglik"]
        assert loglik == float(repr(loglik))


class TestBayesianRun:
    def test_short_chain_returns_warning_code(self, bayes_run):
        code, out = bayes_run
        assert code == 2
        report = read_report(out)
        assert report["exit_status"] == 2
        assert report["bayesian"]["flags"]

    def test_bayes_block_schema(self, bayes_run):
        _, out = bayes_run
        bayes = read_report(out)["bayesian"]
        assert bayes["n_draws"] == 1200
        row = bayes["estimates"][0]
        assert set(row) == {"name", "mean", "sd", "ci_low", "ci_high",
                            "ess", "rhat"}

    def test_frequentist_block_null(self, bayes_run):
        _, out = bayes_run
        report = read_report(out)
        assert report["frequentist"] is None
        assert report["lr_test_vs_base"] is None
        crit = report["criteria"]
        for key in FREQ_CRITERIA:
            assert crit[key] is None
        for key in BAYES_CRITERIA:
            assert isinstance(crit[key], float)


class TestInfluenceRun:
    def test_influence_artifact_written(self, tmp_path):
        make_csv(tmp_path / "data.csv", n=45, seed=9)
        out = tmp_path / "out"
        code = main([
            "fit", str(tmp_path / "data.csv"),
            "--family", "gompertz",
            "--influence",
            "--out", str(out),
        ])
        assert code == 0
        report = read_report(out)
        assert report["artifacts"]["influence"] == "influence.csv"
        assert report["influence"]["gd_max"] >= 0.0
        rows = read_rows(out / "influence.csv")
        assert len(rows) == 45
        assert list(rows[0]) == ["index", "gd", "ld", "flagged", "refit_failed"]
        flagged_csv = [int(r["index"]) for r in rows if r["flagged"] == "1"]
        assert flagged_csv == report["influence"]["flagged"]


class TestErrors:
    def test_missing_input_file(self, tmp_path, capsys):
        code = main([
            "fit", str(tmp_path / "absent.csv"),
            "--family", "gompertz",
            "--out", str(tmp_path),
        ])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_missing_family(self, tmp_path, capsys):
        make_csv(tmp_path / "data.csv", n=30)
        code = main(["fit", str(tmp_path / "data.csv")])
        assert code == 1
        assert "--family is required" in capsys.readouterr().err

    def test_unknown_family_rejected_by_parser(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["fit", "x.csv", "--family", "weibull"])

    def test_bad_column_reported(self, tmp_path, capsys):
        make_csv(tmp_path / "data.csv", n=30)
        code = main([
            "fit", str(tmp_path / "data.csv"),
            "--family", "gompertz",
            "--alpha-covariates", "nope",
            "--out", str(tmp_path),
        ])
        assert code == 1
        assert "nope" in capsys.readouterr().err


class TestConfigFile:
    def parse(self, argv):
        return build_parser().parse_args(argv)

    def test_flags_override_file(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "family": "gompertz",
            "seed": 3,
            "engine": "bayes",
            "alpha_covariates": "x11,x12",
        }), encoding="utf-8")
        args = self.parse([
            "fit", "data.csv", "--config", str(cfg), "--seed", "7",
        ])
        config = config_from_args(args)
        assert config.seed == 7
        assert config.engine == "bayesian"
        assert config.family is Family.GOMPERTZ
        assert config.alpha_covariates == ("x11", "x12")

    def test_list_valued_covariates_accepted(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "family": "ig",
            "beta_covariates": ["x21", "x22"],
        }), encoding="utf-8")
        config = config_from_args(self.parse([
            "fit", "data.csv", "--config", str(cfg),
        ]))
        assert config.beta_covariates == ("x21", "x22")
        assert config.alpha_covariates == ()

    def test_unknown_keys_rejected(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"family": "gompertz", "chains": 4}),
                       encoding="utf-8")
        with pytest.raises(ValueError, match="unknown config keys: chains"):
            config_from_args(self.parse([
                "fit", "data.csv", "--config", str(cfg),
            ]))

    def test_threads_flag_accepted(self):
        config = config_from_args(self.parse([
            "fit", "data.csv", "--family", "gompertz", "--threads", "4",
        ]))
        assert config.threads == 4


class TestSimulate:
    def test_simulate_writes_table(self, tmp_path):
        code = main([
            "simulate", "--family", "gompertz", "--n", "60", "--reps", "3",
            "--seed", "0", "--out", str(tmp_path),
        ])
        assert code == 0
        rows = read_rows(tmp_path / "simulation_gompertz_n60.csv")
        assert [r["parameter"] for r in rows] == [
            "alpha:intercept", "alpha:x11", "alpha:x12",
            "beta:intercept", "beta:x21", "beta:x22",
        ]
        for row in rows:
            assert row["engine"] == "frequentist"
            assert int(row["replicates_used"]) + int(row["failures"]) == 3
            assert 0.0 <= float(row["coverage"]) <= 1.0

    def test_custom_truth_round_trips(self, tmp_path):
        code = main([
            "simulate", "--family", "mo-gompertz", "--n", "80", "--reps", "2",
            "--seed", "1", "--truth-a=-1.0,0.4,0.1", "--tilt", "1.5",
            "--out", str(tmp_path),
        ])
        assert code == 0
        rows = read_rows(tmp_path / "simulation_mo-gompertz_n80.csv")
        truth = {r["parameter"]: float(r["true"]) for r in rows}
        assert truth["alpha:intercept"] == -1.0
        assert truth["alpha:x12"] == 0.1
        assert truth["tilt"] == 1.5

    def test_malformed_truth_reported(self, tmp_path, capsys):
        code = main([
            "simulate", "--family", "gompertz", "--n", "50", "--reps", "2",
            "--truth-a", "1.0,2.0", "--out", str(tmp_path),
        ])
        assert code == 1
        assert "exactly 3 values" in capsys.readouterr().err
