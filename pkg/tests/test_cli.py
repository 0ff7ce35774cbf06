import csv
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from colored_mppi.cli import main
from colored_mppi.experiments import (
    SUMMARY_COLUMNS,
    TIMING_COLUMNS,
    ExperimentConfig,
    apply_axis,
    run_experiment,
)
from colored_mppi.samplers import SamplerConfig
from colored_mppi.controller import MppiConfig

BASE = {
    "system": "double_integrator",
    "controller": {"num_samples": 128, "horizon": 20, "dt": 0.015},
    "samplers": [
        {"kind": "gaussian", "sigma": [1.5]},
        {"kind": "colored", "sigma": [1.5], "gamma": [2.0]},
        {"kind": "smooth_star", "sigma": [1.5]},
    ],
    "duration_seconds": 0.15,
    "repetitions": 2,
    "seed": 3,
}


def write_config(tmp_path, **overrides):
    data = {**BASE, **overrides}
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return path


def read_csv(path):
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


def strip_timing(rows):
    header = rows[0]
    keep = [i for i, name in enumerate(header) if name not in TIMING_COLUMNS]
    return [[row[i] for i in keep] for row in rows]


class TestConfig:
    def test_round_trip(self, tmp_path):
        config = ExperimentConfig.load(write_config(tmp_path))
        assert ExperimentConfig.from_json(config.to_json()) == config
        # smooth samplers inherit the controller step
        assert config.samplers[2].dt == 0.015

    @settings(max_examples=25, deadline=None)
    @given(
        sigma=st.floats(0.01, 10), gamma=st.floats(0, 5), reps=st.integers(1, 50),
        seed=st.integers(0, 2**40), lam=st.floats(1e-3, 1e3),
    )
    def test_round_trip_property(self, sigma, gamma, reps, seed, lam):
        config = ExperimentConfig(
            system="double_integrator",
            controller=MppiConfig(lambda_=lam),
            samplers=(SamplerConfig("colored", sigma, gamma=gamma),
                      SamplerConfig("smooth", sigma, dt=0.015)),
            repetitions=reps, seed=seed, x0=(-9.0, 0.0),
        )
        assert ExperimentConfig.from_json(config.to_json()) == config

    @pytest.mark.parametrize("change", [
        {"repetitions": 0},
        {"system": "boat"},
        {"samplers": []},
        {"duration_seconds": 0.02},
        {"x0": [1.0]},
        {"bogus": 1},
        {"controller": {"horizon": 1}},
        {"controller": {"gain": 1}},
        {"samplers": [{"kind": "gaussian", "sigma": [1.0, 1.0]}]},
        {"samplers": [{"kind": "gaussian", "sigma": [1.0]}, {"kind": "gaussian", "sigma": [2.0]}]},
    ])
    def test_rejects_invalid(self, change):
        with pytest.raises((ValueError, TypeError)):
            ExperimentConfig.from_dict({**BASE, **change})

    def test_apply_axis(self, tmp_path):
        config = ExperimentConfig.load(write_config(tmp_path))
        assert apply_axis(config, "sigma", 0.5).samplers[0].sigma == (0.5,)
        assert apply_axis(config, "gamma", 4).samplers[1].gamma == (4.0,)
        assert apply_axis(config, "controller.lambda_", 10).controller.lambda_ == 10.0
        assert apply_axis(config, "controller.num_samples", 64).controller.num_samples == 64
        assert apply_axis(config, "duration_seconds", 0.3).duration_seconds == 0.3
        for axis in ("bogus", "controller.bogus", "system", "controller"):
            with pytest.raises(ValueError):
                apply_axis(config, axis, 1.0)
        with pytest.raises(ValueError):
            apply_axis(config, "controller.num_samples", 1.5)


class TestRun:
    def test_outputs_and_schema(self, tmp_path):
        out = tmp_path / "out"
        assert main(["run", "--config", str(write_config(tmp_path)), "--out", str(out)]) == 0
        runs = read_csv(out / "runs.csv")
        assert runs[0] == ["sampler", "rep", "t_seconds", "position", "velocity", "accel", "step_cost"]
        assert len(runs) == 1 + 3 * 2 * 10
        summary = read_csv(out / "summary.csv")
        assert tuple(summary[0]) == SUMMARY_COLUMNS
        assert [row[0] for row in summary[1:]] == ["gaussian", "colored(2)", "smooth_star"]
        assert all(row[4] == "2" and row[5] == "0" for row in summary[1:])
        assert ExperimentConfig.load(out / "config.json").seed == 3
        # every number uses '.' as decimal separator and parses back
        for row in runs[1:]:
            [float(v) for v in row[2:]]

    def test_summary_matches_runs(self, tmp_path):
        out = tmp_path / "out"
        main(["run", "--config", str(write_config(tmp_path)), "--out", str(out)])
        runs = read_csv(out / "runs.csv")[1:]
        costs = {}
        for row in runs:
            costs.setdefault((row[0], row[1]), 0.0)
            costs[(row[0], row[1])] += float(row[-1])
        summary = {row[0]: row for row in read_csv(out / "summary.csv")[1:]}
        gaussian = [costs[("gaussian", r)] for r in ("0", "1")]
        assert float(summary["gaussian"][6]) == pytest.approx(np.mean(gaussian), rel=1e-12)
        assert float(summary["gaussian"][7]) == pytest.approx(np.std(gaussian, ddof=1), rel=1e-9)

    def test_byte_identical_across_threads(self, tmp_path):
        config = write_config(tmp_path, repetitions=1)
        outputs = []
        for threads in (1, 4, 16, 1):
            out = tmp_path / f"t{threads}_{len(outputs)}"
            assert main(["run", "--config", str(config), "--out", str(out), "--threads", str(threads)]) == 0
            outputs.append(out)
        ref = outputs[0]
        for other in outputs[1:]:
            for name in ("runs.csv", "psd.csv", "config.json"):
                assert (ref / name).read_bytes() == (other / name).read_bytes()
            assert strip_timing(read_csv(ref / "summary.csv")) == strip_timing(read_csv(other / "summary.csv"))

    def test_seed_override_changes_results(self, tmp_path):
        config = write_config(tmp_path, repetitions=1)
        main(["run", "--config", str(config), "--out", str(tmp_path / "a")])
        main(["run", "--config", str(config), "--out", str(tmp_path / "b"), "--seed", "99"])
        assert (tmp_path / "a" / "runs.csv").read_bytes() != (tmp_path / "b" / "runs.csv").read_bytes()
        assert ExperimentConfig.load(tmp_path / "b" / "config.json").seed == 99

    def test_duration_dt_single_row(self, tmp_path):
        out = tmp_path / "out"
        main(["run", "--config", str(write_config(tmp_path, duration_seconds=0.015)), "--out", str(out)])
        runs = read_csv(out / "runs.csv")[1:]
        assert len(runs) == 3 * 2
        # a run shorter than the analysis window yields no periodogram rows
        assert read_csv(out / "psd.csv")[1:] == []

    def test_psd_rows(self, tmp_path):
        out = tmp_path / "out"
        config = write_config(tmp_path, duration_seconds=0.3, analysis_window=0.3, repetitions=1)
        main(["run", "--config", str(config), "--out", str(out)])
        rows = read_csv(out / "psd.csv")
        assert rows[0] == ["sampler", "rep", "control", "frequency_hz", "power"]
        assert len(rows) == 1 + 3 * 11

    def test_failed_repetitions_are_recorded(self, tmp_path, monkeypatch):
        import colored_mppi.experiments as experiments

        calls = {"n": 0}
        original = experiments.receding_horizon_run

        def flaky(*args, **kwargs):
            calls["n"] += 1
            if calls["n"] == 1:
                raise FloatingPointError("every rollout produced a non-finite cost")
            return original(*args, **kwargs)

        monkeypatch.setattr(experiments, "receding_horizon_run", flaky)
        config = ExperimentConfig.load(write_config(tmp_path))
        result = run_experiment(config, tmp_path / "out")
        assert list(result.results[0].failures) == [0]
        summary = read_csv(tmp_path / "out" / "summary.csv")
        assert summary[1][4:6] == ["1", "1"]


class TestSweep:
    def test_sigma_blocks(self, tmp_path):
        out = tmp_path / "sweep"
        args = ["sweep", "--config", str(write_config(tmp_path, repetitions=1)), "--out", str(out),
                "--axis", "sigma", "--values", "0.5", "1.5", "3.0"]
        assert main(args) == 0
        summary = read_csv(out / "summary.csv")
        assert summary[0][:2] == ["axis", "value"]
        assert [row[1] for row in summary[1:]] == ["0.5"] * 3 + ["1.5"] * 3 + ["3.0"] * 3
        assert sorted(p.name for p in out.iterdir() if p.is_dir()) == [
            "sigma=0.5", "sigma=1.5", "sigma=3.0"]

    def test_single_value_equals_run(self, tmp_path):
        config = write_config(tmp_path, repetitions=1)
        main(["sweep", "--config", str(config), "--out", str(tmp_path / "s"),
              "--axis", "sigma", "--values", "1.5"])
        main(["run", "--config", str(config), "--out", str(tmp_path / "r")])
        assert (tmp_path / "s" / "sigma=1.5" / "runs.csv").read_bytes() == (tmp_path / "r" / "runs.csv").read_bytes()

    def test_unknown_axis_fails(self, tmp_path, capsys):
        code = main(["sweep", "--config", str(write_config(tmp_path)), "--out", str(tmp_path / "x"),
                     "--axis", "bogus", "--values", "1"])
        assert code != 0
        assert "unknown axis" in capsys.readouterr().err


class TestAnalyze:
    def test_recomputes_costs(self, tmp_path):
        out = tmp_path / "out"
        main(["run", "--config", str(write_config(tmp_path)), "--out", str(out)])
        assert main(["analyze", "--out", str(out)]) == 0
        rows = read_csv(out / "analysis.csv")
        assert rows[0][:4] == ["sampler", "rep", "steps", "accumulated_cost"]
        summary = {row[0]: row for row in read_csv(out / "summary.csv")[1:]}
        for label in ("gaussian", "colored(2)"):
            costs = [float(r[3]) for r in rows[1:] if r[0] == label]
            assert np.mean(costs) == pytest.approx(float(summary[label][6]), rel=1e-12)

    def test_missing_directory(self, tmp_path, capsys):
        assert main(["analyze", "--out", str(tmp_path / "nothing")]) != 0
        assert "error" in capsys.readouterr().err


class TestSampleNoise:
    def test_files(self, tmp_path):
        out = tmp_path / "noise"
        assert main(["sample-noise", "--horizon", "65", "--gamma", "1", "--samples", "3",
                     "--seed", "1", "--out", str(out), "--dt", "0.015"]) == 0
        rows = read_csv(out / "noise.csv")
        assert rows[0] == ["sample_id", "t", "dim", "value"]
        assert len(rows) == 1 + 3 * 65
        pgram = read_csv(out / "periodogram.csv")
        assert pgram[0] == ["frequency_hz", "mean_power"]
        assert len(pgram) == 1 + 33

    def test_single_sample_rows(self, tmp_path):
        main(["sample-noise", "--horizon", "65", "--samples", "1", "--out", str(tmp_path / "n")])
        assert len(read_csv(tmp_path / "n" / "noise.csv")) == 1 + 65

    def test_smoothness_ordering(self, tmp_path):
        roughness = []
        for gamma in (1, 2, 4):
            out = tmp_path / f"g{gamma}"
            main(["sample-noise", "--horizon", "65", "--gamma", str(gamma), "--samples", "200",
                  "--out", str(out)])
            values = np.array([float(r[3]) for r in read_csv(out / "noise.csv")[1:]]).reshape(200, 65)
            roughness.append(np.mean(np.abs(np.diff(values, axis=1))))
        assert roughness[0] > roughness[1] > roughness[2]

    def test_white_output_is_white(self, tmp_path):
        out = tmp_path / "white"
        main(["sample-noise", "--horizon", "65", "--gamma", "0", "--samples", "3000", "--out", str(out)])
        values = np.array([float(r[3]) for r in read_csv(out / "noise.csv")[1:]]).reshape(3000, 65)
        assert values.var() == pytest.approx(1.0, rel=0.03)
        lag1 = np.mean(values[:, 1:] * values[:, :-1])
        assert abs(lag1) < 0.02

    def test_config_file_and_errors(self, tmp_path, capsys):
        cfg = tmp_path / "noise.json"
        cfg.write_text(json.dumps({"horizon": 16, "gamma": 2.0, "samples": 2, "seed": 4}))
        assert main(["sample-noise", "--config", str(cfg), "--out", str(tmp_path / "n")]) == 0
        assert len(read_csv(tmp_path / "n" / "noise.csv")) == 1 + 32
        assert main(["sample-noise", "--out", str(tmp_path / "m")]) != 0
        assert main(["sample-noise", "--horizon", "1", "--out", str(tmp_path / "m")]) != 0
        cfg.write_text(json.dumps({"horizon": 16, "colour": 1}))
        assert main(["sample-noise", "--config", str(cfg), "--out", str(tmp_path / "m")]) != 0
        assert "error" in capsys.readouterr().err

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(["sample-noise", "--horizon", "8", "--out", str(blocker / "sub")]) != 0


def test_missing_config_fails(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) != 0
    assert "error" in capsys.readouterr().err


def test_bad_json_fails(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["run", "--config", str(path)]) != 0


def test_shipped_configs_parse():
    root = Path(__file__).resolve().parents[1] / "configs"
    for path in sorted(root.glob("table2_*.json")) + [root / "quick.json"]:
        config = ExperimentConfig.load(path)
        assert config.system == "double_integrator"
