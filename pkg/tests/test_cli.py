"""Tests for the experiment runner: configuration, subcommands, sweeps,
artifact determinism, and the exit-code contract."""

import json
from pathlib import Path

import numpy as np
import pytest

from roughflow.cli import (ExperimentConfig, apply_point, config_from_args,
                           compact_bump_drift, load_config_file, main,
                           make_drift, parse_grid, run_inverse, run_lift,
                           run_permanent, run_sample_fbm, run_weak_residual)
from roughflow.errors import InputError, ParameterError
from roughflow.reporting import validate_report


class TestExperimentConfig:
    def test_defaults_validate(self):
        cfg = ExperimentConfig().validate()
        assert cfg.hurst == 0.25
        assert cfg.grid().n_steps == 512

    def test_gamma_invariant_named(self):
        with pytest.raises(ParameterError, match="gamma < H"):
            ExperimentConfig(gamma=0.3, hurst=0.25).validate()

    def test_power_of_two_invariant_named(self):
        with pytest.raises(ParameterError, match="power of 2"):
            ExperimentConfig(n_steps=500).validate()

    def test_seed_range(self):
        ExperimentConfig(seed=2**64 - 1).validate()
        with pytest.raises(ParameterError):
            ExperimentConfig(seed=2**64).validate()
        with pytest.raises(ParameterError):
            ExperimentConfig(seed=-1).validate()

    def test_thread_and_path_counts(self):
        with pytest.raises(ParameterError):
            ExperimentConfig(threads=0).validate()
        with pytest.raises(ParameterError):
            ExperimentConfig(n_paths=0).validate()

    def test_unknown_drift_preset(self):
        with pytest.raises(ParameterError):
            ExperimentConfig(drift="zigzag").validate()

    def test_custom_table_validation(self):
        with pytest.raises(ParameterError):
            ExperimentConfig(drift="custom-table",
                             drift_table={"x": [0, 1], "b": [1]}).validate()
        with pytest.raises(ParameterError):
            ExperimentConfig(drift="custom-table",
                             drift_table={"x": [1, 0], "b": [1, 2]}).validate()
        ExperimentConfig(drift="custom-table",
                         drift_table={"x": [0, 1], "b": [1, 2]}).validate()


class TestConfigLoading:
    def test_json_file(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"n_steps": 256, "seed": 7}')
        assert load_config_file(str(p)) == {"n_steps": 256, "seed": 7}

    def test_toml_file(self, tmp_path):
        p = tmp_path / "c.toml"
        p.write_text('n_steps = 256\nhurst = 0.3\n')
        assert load_config_file(str(p)) == {"n_steps": 256, "hurst": 0.3}

    def test_missing_file(self):
        with pytest.raises(InputError):
            load_config_file("/nonexistent/c.json")

    def test_flags_override_file(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"seed": 7, "out_dir": "from_file"}')

        class Args:
            config = str(p)
            seed = 11
            out = None
            threads = 2

        cfg = config_from_args(Args())
        assert cfg.seed == 11
        assert cfg.out_dir == "from_file"
        assert cfg.threads == 2

    def test_unknown_keys_rejected(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"n_stepz": 256}')

        class Args:
            config = str(p)
            seed = None
            out = None
            threads = None

        with pytest.raises(InputError, match="n_stepz"):
            config_from_args(Args())


class TestMakeDrift:
    def test_presets(self):
        for name, x, expected in [("zero", 0.3, 0.0), ("constant", 9.0, 1.0),
                                  ("sign", -2.0, -1.0)]:
            drift = make_drift(ExperimentConfig(drift=name))
            assert drift(0.0, np.array([x]))[0] == pytest.approx(expected)

    def test_cos_amplitude(self):
        drift = make_drift(ExperimentConfig(drift="cos", drift_value=0.5))
        assert drift(0.0, np.array([0.0]))[0] == pytest.approx(0.5)

    def test_custom_table_interpolates(self):
        cfg = ExperimentConfig(drift="custom-table",
                               drift_table={"x": [0.0, 1.0], "b": [0.0, 2.0]})
        drift = make_drift(cfg)
        assert drift(0.0, np.array([0.5]))[0] == pytest.approx(1.0)
        assert drift.derivative_at(0.0, np.array([0.5]))[0] == pytest.approx(2.0)

    def test_compact_bump_drift_vanishes(self):
        drift = compact_bump_drift()
        assert drift(0.0, np.array([1.5]))[0] == 0.0
        assert drift.derivative_at(0.0, np.array([1.5]))[0] == 0.0


class TestRunners:
    def test_sample_fbm_report(self, tmp_path):
        cfg = ExperimentConfig(n_steps=64, n_paths=300, seed=1)
        report = run_sample_fbm(cfg, tmp_path / "s")
        assert report.passed
        validate_report(report.to_dict())
        names = {Path(a).name for a in report.artifacts}
        assert names == {"covariance.csv", "sample_paths.csv", "paths.png"}
        for a in report.artifacts:
            assert Path(a).exists()

    def test_lift_chen_check(self, tmp_path):
        cfg = ExperimentConfig(n_steps=256)
        report = run_lift(cfg, tmp_path / "l")
        assert report.passed
        assert report.metrics["degree"] == 5
        csv = next(a for a in report.artifacts if a.endswith(".csv"))
        lines = Path(csv).read_text().splitlines()
        assert lines[0] == "level,increment_over_horizon,holder_norm"
        assert len(lines) == 6

    def test_inverse_defect_ratio(self, tmp_path):
        cfg = ExperimentConfig(n_steps=512, drift="cos")
        report = run_inverse(cfg, tmp_path / "i")
        assert report.passed
        assert 0.0 < report.metrics["defect_fine"] < report.metrics["defect_coarse"]

    def test_weak_residual_column(self, tmp_path):
        report = run_weak_residual(ExperimentConfig(), tmp_path / "w")
        assert report.passed
        res = report.metrics["residuals"]
        assert len(res) == 3
        assert res[0] > res[1] > res[2]

    def test_permanent_artifacts(self, tmp_path):
        report = run_permanent(ExperimentConfig(), tmp_path / "p")
        assert report.passed
        names = {Path(a).name for a in report.artifacts}
        assert "integral_estimates.json" in names
        assert "polynomial_m6.csv" in names
        payload = json.loads(
            (tmp_path / "p" / "integral_estimates.json").read_text())
        assert [row["m"] for row in payload] == [2, 3, 4]
        assert all(set(row) == {"m", "H", "lhs", "envelope", "fitted_C"}
                   for row in payload)


class TestSweep:
    def test_parse_grid_validates_keys(self):
        assert parse_grid('{"N": [256, 512]}') == {"N": [256, 512]}
        with pytest.raises(InputError):
            parse_grid('{"nope": [1]}')
        with pytest.raises(InputError):
            parse_grid('{"N": []}')

    def test_apply_point_overrides(self):
        cfg = apply_point(ExperimentConfig(), {"H": 0.3, "N": 256})
        assert cfg.hurst == 0.3
        assert cfg.n_steps == 256

    def test_empty_grid_exit_zero(self, tmp_path, capsys):
        code = main(["sweep", "lift", "--out", str(tmp_path)])
        assert code == 0
        report = json.loads(
            (tmp_path / "sweep-lift" / "report.json").read_text())
        assert report["metrics"]["rows"] == []

    def test_weak_residual_sweep_column(self, tmp_path, capsys):
        code = main(["sweep", "weak-residual", "--out", str(tmp_path),
                     "--grid", '{"N": [256, 512, 1024]}'])
        assert code == 0
        table = json.loads(
            (tmp_path / "sweep-weak-residual" / "sweep.json").read_text())
        col = [row["residual"] for row in table["rows"]]
        assert col[0] > col[1] > col[2]

    def test_cross_product_sweep(self, tmp_path, capsys):
        code = main(["sweep", "lift", "--out", str(tmp_path),
                     "--grid", '{"H": [0.25, 0.3], "N": [128, 256]}'])
        assert code == 0
        table = json.loads(
            (tmp_path / "sweep-lift" / "sweep.json").read_text())
        assert len(table["rows"]) == 4
        assert all(row["passed"] for row in table["rows"])


class TestMainContract:
    def test_pass_exit_zero(self, tmp_path, capsys):
        code = main(["lift", "--out", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "[PASS] chen_exact" in out

    def test_check_failure_exit_one(self, tmp_path, capsys):
        # at N=256 alone the smooth-consistency gap sits above 1e-3
        cfg = tmp_path / "c.json"
        cfg.write_text('{"n_steps": 256}')
        code = main(["integrate", "--config", str(cfg), "--out",
                     str(tmp_path)])
        assert code == 1
        err = capsys.readouterr().err
        assert "failing checks" in err
        assert "smooth_consistency_gap" in err

    def test_bad_config_exit_two(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text('{"gamma": 0.4, "hurst": 0.25}')
        code = main(["lift", "--config", str(cfg), "--out", str(tmp_path)])
        assert code == 2
        assert "gamma < H" in capsys.readouterr().err

    def test_json_flag_emits_valid_report(self, tmp_path, capsys):
        code = main(["lift", "--json", "--out", str(tmp_path)])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        validate_report(payload)
        assert payload["subcommand"] == "lift"

    def test_seed_flag_overrides(self, tmp_path, capsys):
        main(["lift", "--seed", "9", "--out", str(tmp_path)])
        report = json.loads((tmp_path / "lift" / "report.json").read_text())
        assert report["config"]["seed"] == 9

    def test_determinism_byte_identical_csv(self, tmp_path, capsys):
        cfg = ExperimentConfig(n_steps=64, n_paths=50)
        a = run_sample_fbm(cfg, tmp_path / "a")
        b = run_sample_fbm(cfg, tmp_path / "b")
        csv_a = next(x for x in a.artifacts if x.endswith("covariance.csv"))
        csv_b = next(x for x in b.artifacts if x.endswith("covariance.csv"))
        assert Path(csv_a).read_bytes() == Path(csv_b).read_bytes()

    def test_report_written_and_schema_valid(self, tmp_path, capsys):
        main(["permanent", "--out", str(tmp_path)])
        payload = json.loads(
            (tmp_path / "permanent" / "report.json").read_text())
        validate_report(payload)
        assert {c["name"] for c in payload["checks"]} == {
            "polynomial_bounds", "oracle_equivalence", "gamma_envelope_rate"}
