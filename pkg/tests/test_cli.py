import json

import numpy as np
import pytest

from subsep.cli import THREADS_ENV, dispatch
from subsep.signal import read_signal_csv


@pytest.fixture
def scenario_dir(tmp_path):
    out = tmp_path / "synth"
    assert dispatch(["synth", "--length", "120", "--n-max", "5", "--seed", "7", "--out", str(out)]) == 0
    return out


def read_json(path):
    with open(path) as f:
        return json.load(f)


class TestSynth:
    def test_writes_traces_and_manifest(self, scenario_dir):
        for name in ("noise", "signal", "mixed"):
            assert read_signal_csv(scenario_dir / f"{name}.csv").length == 120
        manifest = read_json(scenario_dir / "manifest.json")
        assert manifest["command"] == "synth"
        assert manifest["seed"] == 7
        assert manifest["parameters"]["synth"]["noise_n_max"] == 5
        assert set(manifest["versions"]) == {"subsep", "python", "numpy", "scipy"}

    def test_reference_length(self, tmp_path):
        out = tmp_path / "ref"
        assert dispatch(["synth", "--length", "403", "--n-max", "21", "--seed", "7", "--out", str(out)]) == 0
        assert read_signal_csv(out / "mixed.csv").length == 403

    def test_same_seed_same_bytes(self, scenario_dir, tmp_path):
        again = tmp_path / "again"
        dispatch(["synth", "--length", "120", "--n-max", "5", "--seed", "7", "--out", str(again)])
        assert (again / "mixed.csv").read_bytes() == (scenario_dir / "mixed.csv").read_bytes()

    def test_invalid_spec_is_runtime_error(self, tmp_path, capsys):
        code = dispatch(["synth", "--length", "10", "--n-max", "5", "--out", str(tmp_path / "x")])
        assert code == 1
        assert "aliases" in capsys.readouterr().err


class TestFilter:
    def test_outputs(self, scenario_dir, tmp_path):
        out = tmp_path / "filter"
        code = dispatch(["filter", "--input", str(scenario_dir / "mixed.csv"), "--q", "0.4",
                         "--n-max", "5", "--knots", "90", "--out", str(out), "--plot"])
        assert code == 0
        filtered = read_signal_csv(out / "filtered.csv")
        noise = read_signal_csv(out / "noise_estimate.csv")
        mixed = read_signal_csv(scenario_dir / "mixed.csv")
        np.testing.assert_allclose(filtered.samples + noise.samples, mixed.samples, atol=1e-10)
        assert len(read_json(out / "knots.json")["interior"]) == 90
        solver = read_json(out / "solver.json")
        assert solver["iterations"] >= 1
        assert len(solver["functional_trace"]) == solver["iterations"] + 1
        assert len(solver["objective_trace"]) == solver["iterations"] + 1
        assert 0 < solver["rank"] <= 94
        assert solver["shared_dim"] >= 1
        assert (out / "filtered.svg").read_text().lstrip().startswith("<?xml")

    def test_knots_file_reused(self, scenario_dir, tmp_path):
        first, second = tmp_path / "first", tmp_path / "second"
        mixed = str(scenario_dir / "mixed.csv")
        dispatch(["filter", "--input", mixed, "--q", "0.5", "--n-max", "5", "--knots", "90", "--out", str(first)])
        code = dispatch(["filter", "--input", mixed, "--q", "0.5", "--n-max", "5",
                         "--knots-file", str(first / "knots.json"), "--out", str(second)])
        assert code == 0
        assert (first / "filtered.csv").read_bytes() == (second / "filtered.csv").read_bytes()

    def test_config_precedence(self, scenario_dir, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"knot_target": 90, "noise": {"n_max": 5}, "solver": {"q": 0.9, "lambda": 1e-6}}))
        mixed = str(scenario_dir / "mixed.csv")

        dispatch(["filter", "--input", mixed, "--config", str(config), "--q", "0.3", "--out", str(tmp_path / "a")])
        resolved = read_json(tmp_path / "a" / "manifest.json")["config"]
        assert resolved["solver"]["q"] == 0.3
        assert resolved["knot_target"] == 90
        assert resolved["solver"]["lambda"] == 1e-6
        assert resolved["noise"]["length"] == 120

        dispatch(["filter", "--input", mixed, "--config", str(config), "--q", "0.7", "--out", str(tmp_path / "b")])
        manifest = read_json(tmp_path / "b" / "manifest.json")
        assert manifest["config"]["solver"]["q"] == 0.7
        assert manifest["config_path"] == str(config)

    def test_default_knot_count_scales_with_length(self, scenario_dir, tmp_path):
        out = tmp_path / "default"
        assert dispatch(["filter", "--input", str(scenario_dir / "mixed.csv"), "--q", "0.5", "--n-max", "5",
                         "--out", str(out)]) == 0
        assert read_json(out / "manifest.json")["config"]["knot_target"] == 102

    @pytest.mark.parametrize(
        "document, key",
        [
            ({"solver": {"epsilon": -1.0}}, "solver.epsilon"),
            ({"solvr": {}}, "solvr"),
            ({"noise": {"n_max": 100}}, "noise"),
        ],
    )
    def test_malformed_config_names_key(self, scenario_dir, tmp_path, capsys, document, key):
        config = tmp_path / "bad.json"
        config.write_text(json.dumps(document))
        code = dispatch(["filter", "--input", str(scenario_dir / "mixed.csv"), "--config", str(config),
                         "--q", "0.5", "--out", str(tmp_path / "out")])
        assert code == 1
        assert f"'{key}" in capsys.readouterr().err

    def test_config_not_json(self, scenario_dir, tmp_path, capsys):
        config = tmp_path / "bad.json"
        config.write_text("{not json")
        code = dispatch(["filter", "--input", str(scenario_dir / "mixed.csv"), "--config", str(config),
                         "--q", "0.5", "--out", str(tmp_path / "out")])
        assert code == 1
        assert "not valid JSON" in capsys.readouterr().err


class TestSweep:
    def sweep(self, scenario_dir, out, *extra):
        return dispatch(["sweep", "--input", str(scenario_dir / "mixed.csv"), "--truth", str(scenario_dir / "signal.csv"),
                         "--n-max", "5", "--knots", "90", "--out", str(out), *extra])

    def test_twenty_rows(self, scenario_dir, tmp_path):
        out = tmp_path / "sweep"
        assert self.sweep(scenario_dir, out, "--step", "0.05") == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[0] == "q,error,converged,iterations"
        assert len(lines) == 21
        summary = read_json(out / "summary.json")
        assert {"best_q", "best_error", "fft_error", "second_best_q", "seed"} <= set(summary)

    def test_manifest_lists_every_tunable(self, scenario_dir, tmp_path):
        out = tmp_path / "sweep"
        self.sweep(scenario_dir, out, "--step", "0.5", "--seed", "3")
        manifest = read_json(out / "manifest.json")
        config = manifest["config"]
        assert manifest["seed"] == 3
        assert manifest["parameters"]["step"] == 0.5
        for key in ("q", "lambda", "epsilon", "max_iter", "init"):
            assert key in config["solver"]
        assert config["spline_order"] == 4
        assert config["knot_target"] == 90
        assert config["noise"]["n_max"] == 5

    def test_reproducible_bytes(self, scenario_dir, tmp_path):
        self.sweep(scenario_dir, tmp_path / "one", "--step", "0.25")
        self.sweep(scenario_dir, tmp_path / "two", "--step", "0.25")
        for name in ("sweep.csv", "summary.json"):
            assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()

    def test_threads_from_environment(self, scenario_dir, tmp_path, monkeypatch):
        self.sweep(scenario_dir, tmp_path / "serial", "--step", "0.25", "--threads", "0")
        monkeypatch.setenv(THREADS_ENV, "2")
        self.sweep(scenario_dir, tmp_path / "parallel", "--step", "0.25")
        assert read_json(tmp_path / "parallel" / "manifest.json")["parameters"]["threads"] == 2
        assert (tmp_path / "serial" / "sweep.csv").read_bytes() == (tmp_path / "parallel" / "sweep.csv").read_bytes()

    def test_bad_thread_variable(self, scenario_dir, tmp_path, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "many")
        assert self.sweep(scenario_dir, tmp_path / "out", "--step", "0.5") == 1


class TestBaselineAndCompare:
    def test_baseline(self, scenario_dir, tmp_path):
        out = tmp_path / "baseline"
        assert dispatch(["baseline", "--input", str(scenario_dir / "mixed.csv"), "--n-max", "5", "--out", str(out)]) == 0
        baseline = read_signal_csv(out / "baseline.csv")
        noise_free = read_signal_csv(scenario_dir / "signal.csv")
        assert baseline.length == noise_free.length

    def test_compare(self, scenario_dir, tmp_path):
        out = tmp_path / "compare"
        code = dispatch(["compare", "--input", str(scenario_dir / "mixed.csv"), "--truth", str(scenario_dir / "signal.csv"),
                         "--q", "0.123", "--n-max", "5", "--knots", "90", "--out", str(out)])
        assert code == 0
        focuss = read_signal_csv(out / "error_focuss.csv")
        fft = read_signal_csv(out / "error_fft.csv")
        assert np.all(focuss.samples >= 0) and np.all(fft.samples >= 0)
        summary = read_json(out / "summary.json")
        assert summary["q"] == 0.123
        assert summary["fft_error"] == pytest.approx(np.linalg.norm(fft.samples))


class TestExitCodes:
    def test_unknown_flag_prints_help(self, tmp_path, capsys):
        assert dispatch(["synth", "--bogus", "--out", str(tmp_path)]) == 2
        err = capsys.readouterr().err
        assert "usage" in err
        assert "Write a seeded noise/signal/mixed scenario" in err
        assert "--bogus" in err

    @pytest.mark.parametrize("argv", [["filter"], ["compare", "--truth", "t.csv"]])
    def test_q_is_required(self, tmp_path, capsys, argv):
        assert dispatch(argv + ["--input", "x.csv", "--out", str(tmp_path)]) == 2
        err = capsys.readouterr().err
        assert "--q" in err
        assert "Exponent of the q-norm-like penalty" in err

    def test_missing_required(self, capsys):
        assert dispatch(["baseline", "--input", "x.csv"]) == 2
        assert "Output directory" in capsys.readouterr().err

    def test_no_command(self):
        assert dispatch([]) == 2

    def test_missing_input_file(self, tmp_path, capsys):
        code = dispatch(["baseline", "--input", str(tmp_path / "absent.csv"), "--out", str(tmp_path / "out")])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_bad_csv(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,value\n0,1\n1,2\n")
        assert dispatch(["baseline", "--input", str(path), "--out", str(tmp_path / "out")]) == 1

    def test_version(self, capsys):
        assert dispatch(["--version"]) == 0
        assert "subsep" in capsys.readouterr().out


class TestBasis:
    def test_two_partitions_same_knot_count(self, scenario_dir, tmp_path):
        out = tmp_path / "basis"
        code = dispatch(["basis", "--input", str(scenario_dir / "mixed.csv"), "--n-max", "5", "--knots", "90",
                         "--out", str(out)])
        assert code == 0
        for name in ("curvature", "uniform"):
            assert len(read_json(out / f"knots_{name}.json")["interior"]) == 90
            table = np.loadtxt(out / f"basis_{name}.csv", delimiter=",", skiprows=1)
            assert table.shape == (120, 1 + 94)
            np.testing.assert_allclose(table[:, 1:].sum(axis=1), 1.0, atol=1e-12)
        assert read_json(out / "manifest.json")["command"] == "basis"
