import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

import mfkl as m
from mfkl import ConfigurationError, MissingArtifactError
from mfkl.harness import (
    decaying_segment,
    emit_report,
    load_config,
    run_experiment,
    validate_config,
    write_json,
)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "mfkl.cli", *args], capture_output=True, text=True
    )


class TestConfigValidation:
    def test_unknown_field_rejected_with_path(self):
        with pytest.raises(ConfigurationError, match="bogus"):
            validate_config({"kind": "constants", "bogus": 1})

    def test_nested_unknown_field(self):
        with pytest.raises(ConfigurationError, match="model"):
            validate_config(
                {"kind": "oracle", "model": {"variant": "quadratic", "nope": 2}}
            )

    def test_kind_required(self):
        with pytest.raises(ConfigurationError):
            validate_config({})

    def test_missing_kind_specific_field(self, tmp_path):
        with pytest.raises(ConfigurationError, match="requires field"):
            run_experiment({"kind": "risk"}, out_dir=str(tmp_path))


class TestConstantsKind:
    def test_json_contains_reference_values(self, tmp_path):
        out = tmp_path / "out"
        run_experiment({"kind": "constants", "gamma": 1.0, "rho": 1.0}, out_dir=str(out))
        payload = json.loads((out / "constants.json").read_text())
        assert payload["a"] == pytest.approx(0.0181818, abs=1e-6)
        assert payload["kappa"] == pytest.approx(0.0058479, abs=1e-6)
        assert "config" in payload

    def test_lyapunov_block_from_model(self, tmp_path):
        out = tmp_path / "out"
        run_experiment(
            {
                "kind": "constants", "gamma": 1.0, "rho": 1.0,
                "model": {"variant": "torus_trig", "a": 0.0, "b": 0.0, "d": 1},
            },
            out_dir=str(out),
        )
        payload = json.loads((out / "constants.json").read_text())
        assert payload["lyapunov"]["torus_additive"] == pytest.approx(766.0)


class TestOracleKind:
    def test_density_csv_variance(self, tmp_path):
        out = tmp_path / "out"
        run_experiment(
            {"kind": "oracle", "model": {"variant": "quadratic", "r": 1.0, "s": 0.25}},
            out_dir=str(out),
        )
        rows = read_csv(out / "density.csv")
        x = np.array([float(r["x"]) for r in rows])
        p = np.array([float(r["density"]) for r in rows])
        dx = x[1] - x[0]
        mean = np.sum(x * p) * dx
        var = np.sum((x - mean) ** 2 * p) * dx
        assert var == pytest.approx(2.0 / 3.0, abs=1e-3)


class TestSampleKind:
    def test_zero_steps_final_equals_initial(self, tmp_path):
        out = tmp_path / "out"
        config = {
            "kind": "sample",
            "model": {"variant": "quadratic", "r": 1.0, "s": 0.0},
            "n_particles": 3,
            "chain": {"h": 0.05, "gamma": 1.0, "n_steps": 0, "seed": 5},
            "init": {"kind": "gaussian", "mean": 0.0, "std": 1.0},
        }
        run_experiment(config, out_dir=str(out))
        trajectory = read_csv(out / "trajectory.csv")
        final = read_csv(out / "final_state.csv")
        assert len(trajectory) == 3 and len(final) == 3
        for t_row, f_row in zip(trajectory, final):
            assert t_row["step"] == "0"
            assert t_row["x"] == f_row["x"] and t_row["v"] == f_row["v"]

    def test_trajectory_schema_and_stride(self, tmp_path):
        out = tmp_path / "out"
        config = {
            "kind": "sample",
            "model": {"variant": "quadratic", "r": 1.0, "s": 0.25},
            "n_particles": 2,
            "chain": {"h": 0.05, "gamma": 1.0, "n_steps": 100, "seed": 5},
            "init": {"kind": "gaussian", "mean": 0.0, "std": 1.0},
            "stride": 10,
        }
        run_experiment(config, out_dir=str(out))
        rows = read_csv(out / "trajectory.csv")
        assert list(rows[0]) == ["step", "particle", "coord", "x", "v"]
        assert len(rows) == 11 * 2  # 11 recorded steps, N=2, d=1


class TestReproducibility:
    def test_same_seed_same_bytes(self, tmp_path):
        config = {
            "kind": "sample",
            "model": {"variant": "quadratic", "r": 1.0, "s": 0.25},
            "n_particles": 4,
            "chain": {"h": 0.05, "gamma": 1.0, "n_steps": 50, "seed": 31},
            "init": {"kind": "gaussian", "mean": 0.0, "std": 1.0},
            "stride": 5,
        }
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        run_experiment(config, out_dir=str(out_a))
        run_experiment(config, out_dir=str(out_b))
        for name in ("trajectory.csv", "final_state.csv", "config.json"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_seed_override_changes_results(self, tmp_path):
        config = {
            "kind": "sample",
            "model": {"variant": "quadratic", "r": 1.0, "s": 0.25},
            "n_particles": 4,
            "chain": {"h": 0.05, "gamma": 1.0, "n_steps": 50, "seed": 31},
            "init": {"kind": "gaussian", "mean": 0.0, "std": 1.0},
        }
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        run_experiment(config, out_dir=str(out_a))
        run_experiment(config, out_dir=str(out_b), seed=32)
        assert (out_a / "final_state.csv").read_bytes() != (out_b / "final_state.csv").read_bytes()


class TestLyapunovCheckKind:
    def test_torus_mode_passes(self, tmp_path):
        out = tmp_path / "out"
        summary = run_experiment(
            {
                "kind": "lyapunov_check",
                "model": {"variant": "torus_trig", "a": 0.3, "b": 0.2, "d": 1},
                "n_particles": 6,
                "chain": {"gamma": 1.0, "seed": 3},
                "h_grid": [0.05],
                "n_states": 6,
                "m_draws": 1000,
            },
            out_dir=str(out),
        )
        assert summary["pass"] is True
        rows = read_csv(out / "drift.csv")
        assert len(rows) == 6
        assert all(r["holds"] == "true" for r in rows)

    def test_euclidean_mode_slope(self, tmp_path):
        out = tmp_path / "out"
        summary = run_experiment(
            {
                "kind": "lyapunov_check",
                "model": {"variant": "quadratic", "r": 1.0, "s": 0.0},
                "n_particles": 8,
                "chain": {"gamma": 1.0, "seed": 3},
                "h_grid": [0.1],
                "n_states": 40,
                "m_draws": 2000,
            },
            out_dir=str(out),
        )
        assert summary["mode"] == "euclidean_slope"
        assert summary["pass"] is True


class TestRiskKind:
    def test_risk_json(self, tmp_path):
        out = tmp_path / "out"
        run_experiment(
            {
                "kind": "risk",
                "model": {"variant": "quadratic", "r": 1.0, "s": 0.25},
                "n_particles": 8,
                "chain": {"h": 0.05, "gamma": 1.0, "n_steps": 200, "seed": 12},
                "init": {"kind": "gaussian", "mean": 0.0, "std": 1.0},
                "reps": 8,
                "observable": "x2_clip25",
                "oracle_mean": 0.6666667,
            },
            out_dir=str(out),
        )
        payload = json.loads((out / "risk.json").read_text())
        assert payload["value"] >= 0.0
        assert payload["reps"] == 8

    def test_unbounded_observable_rejected(self, tmp_path):
        with pytest.raises(ConfigurationError, match="unbounded"):
            run_experiment(
                {
                    "kind": "risk",
                    "model": {"variant": "quadratic", "r": 1.0, "s": 0.25},
                    "n_particles": 8,
                    "chain": {"h": 0.05, "gamma": 1.0, "n_steps": 10, "seed": 12},
                    "init": {"kind": "gaussian", "mean": 0.0, "std": 1.0},
                    "reps": 8,
                    "observable": "x2",
                    "oracle_mean": 0.67,
                },
                out_dir=str(tmp_path / "out"),
            )


class TestSweepKinds:
    def test_sweep_h_rows_and_slope(self, tmp_path):
        out = tmp_path / "out"
        summary = run_experiment(
            {
                "kind": "sweep_h",
                "model": {"variant": "quadratic", "r": 1.0, "s": 0.0},
                "n_particles": 1,
                "chain": {"gamma": 1.0, "n_steps": 2000, "seed": 9},
                "init": {"kind": "point", "at": 0.0},
                "h_grid": [0.1, 0.2, 0.4],
                "observable": "x2",
                "oracle_mean": 1.0,
                "reps": 2,
                "stride": 4,
            },
            out_dir=str(out),
        )
        rows = read_csv(out / "sweep.csv")
        assert [r["parameter"] for r in rows] == ["0.1", "0.2", "0.4"]
        assert list(rows[0]) == ["parameter", "estimate", "std_err",
                                 "gate_lo", "gate_hi", "pass"]
        assert np.isfinite(summary["slope"])
        assert summary["gate"] == [1.5, 2.5]

    def test_sweep_n_risk_table(self, tmp_path):
        out = tmp_path / "out"
        summary = run_experiment(
            {
                "kind": "sweep_N",
                "model": {"variant": "quadratic", "r": 1.0, "s": 0.25},
                "chain": {"h": 0.05, "gamma": 1.0, "n_steps": 400, "seed": 5},
                "init": {"kind": "gaussian", "mean": 0.0, "std": 1.0},
                "n_grid": [4, 32],
                "reps": 16,
                "observable": "x2_clip25",
                "oracle_mean": 0.6666667,
            },
            out_dir=str(out),
        )
        rows = read_csv(out / "sweep.csv")
        assert len(rows) == 2
        estimates = [float(r["estimate"]) for r in rows]
        assert all(v >= 0.0 for v in estimates)
        assert summary["risk_decreasing_in_N"] == (estimates[0] > estimates[1])


class TestConvergeKind:
    def test_series_and_summary(self, tmp_path):
        out = tmp_path / "out"
        summary = run_experiment(
            {
                "kind": "converge",
                "model": {"variant": "quadratic", "r": 1.0, "s": 0.25},
                "n_particles": 16,
                "chain": {"h": 0.05, "gamma": 1.0, "n_steps": 120, "seed": 6},
                "init": {"kind": "point", "at": 2.0},
                "reps": 96,
                "stride": 2,
                "n_bins": 25,
            },
            out_dir=str(out),
        )
        rows = read_csv(out / "series.csv")
        assert list(rows[0]) == ["step", "tv", "kl"]
        assert summary["rate"] < 1.0


class TestDecayingSegment:
    def test_trims_head_and_tail(self):
        series = np.concatenate([
            np.full(5, 0.99), 0.8 * 0.9 ** np.arange(30), np.full(20, 0.02),
        ])
        start, end = decaying_segment(series, floor=0.02)
        assert start == 5
        assert end < len(series)

    def test_short_series_untouched(self):
        series = np.linspace(1.0, 0.5, 8)
        assert decaying_segment(series, floor=0.01) == (0, 8)


class TestEmitReport:
    def test_missing_directory(self, tmp_path):
        with pytest.raises(MissingArtifactError):
            emit_report(str(tmp_path / "nope"))

    def test_empty_directory(self, tmp_path):
        with pytest.raises(MissingArtifactError):
            emit_report(str(tmp_path))

    def test_gate_arithmetic_pass_line(self, tmp_path):
        # a sweep summary whose slope 2.1 sits inside the [1.5, 2.5] gate
        write_json(tmp_path / "config.json", {"kind": "sweep_h"})
        write_json(
            tmp_path / "summary.json",
            {"experiment": "sweep_h", "slope": 2.1, "gate": [1.5, 2.5], "pass": True},
        )
        text = emit_report(str(tmp_path))
        assert "PASS" in text
        assert "slope = 2.1" in text

    def test_fail_line_names_state_and_h(self, tmp_path):
        write_json(tmp_path / "config.json", {"kind": "lyapunov_check"})
        write_json(
            tmp_path / "summary.json",
            {
                "experiment": "lyapunov_check",
                "pass": False,
                "failures": [{"state": 17, "h": 0.1}],
            },
        )
        text = emit_report(str(tmp_path))
        assert "FAIL" in text
        assert '"state": 17' in text and '"h": 0.1' in text

    def test_index_lists_files(self, tmp_path):
        write_json(tmp_path / "config.json", {"kind": "constants"})
        write_json(tmp_path / "constants.json", {"a": 1.0})
        emit_report(str(tmp_path))
        index = json.loads((tmp_path / "index.json").read_text())
        names = {f["name"] for f in index["files"]}
        assert {"config.json", "constants.json"} <= names


class TestCli:
    def test_constants_roundtrip(self, tmp_path):
        config_path = tmp_path / "c.json"
        config_path.write_text(json.dumps({"kind": "constants", "gamma": 1.0, "rho": 1.0}))
        result = run_cli("constants", "--config", str(config_path), "--out",
                         str(tmp_path / "out"))
        assert result.returncode == 0
        assert (tmp_path / "out" / "constants.json").exists()

    def test_schema_violation_exit_2(self, tmp_path):
        config_path = tmp_path / "c.json"
        config_path.write_text(json.dumps({"kind": "constants", "gamma": 1.0,
                                           "rho": 1.0, "junk": True}))
        result = run_cli("constants", "--config", str(config_path), "--out",
                         str(tmp_path / "out"))
        assert result.returncode == 2
        assert "junk" in result.stderr

    def test_kind_mismatch_exit_2(self, tmp_path):
        config_path = tmp_path / "c.json"
        config_path.write_text(json.dumps({"kind": "constants", "gamma": 1.0, "rho": 1.0}))
        result = run_cli("oracle", "--config", str(config_path), "--out",
                         str(tmp_path / "out"))
        assert result.returncode == 2

    def test_numerical_domain_exit_3(self, tmp_path):
        # unstable step size: the Verlet map diverges and overflows
        config_path = tmp_path / "c.json"
        config_path.write_text(json.dumps({
            "kind": "sample",
            "model": {"variant": "quadratic", "r": 1.0, "s": 0.0},
            "n_particles": 2,
            "chain": {"h": 9.9, "gamma": 0.1, "n_steps": 500, "seed": 1},
            "init": {"kind": "gaussian", "mean": 0.0, "std": 1.0},
        }))
        result = run_cli("sample", "--config", str(config_path), "--out",
                         str(tmp_path / "out"))
        assert result.returncode == 3
        assert "step" in result.stderr

    def test_non_convergence_exit_4(self, tmp_path):
        config_path = tmp_path / "c.json"
        config_path.write_text(json.dumps({
            "kind": "oracle",
            "model": {"variant": "quadratic", "r": 1.0, "s": 0.25},
            "tol": 1e-14,
            "max_iter": 2,
        }))
        result = run_cli("oracle", "--config", str(config_path), "--out",
                         str(tmp_path / "out"))
        assert result.returncode == 4

    def test_report_missing_exit_5(self, tmp_path):
        result = run_cli("report", "--out", str(tmp_path / "empty"))
        assert result.returncode == 5

    def test_threads_env_fallback(self):
        from mfkl.harness import resolve_threads

        assert resolve_threads(3) == 3
        old = os.environ.get("MFKL_THREADS")
        os.environ["MFKL_THREADS"] = "7"
        try:
            assert resolve_threads(None) == 7
        finally:
            if old is None:
                del os.environ["MFKL_THREADS"]
            else:
                os.environ["MFKL_THREADS"] = old
