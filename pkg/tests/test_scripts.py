import importlib.util
import json
from pathlib import Path

import pytest

from subsep.cli import dispatch

SCRIPTS = Path(__file__).resolve().parent.parent / "scripts"


def load_script(name):
    spec = importlib.util.spec_from_file_location(name, SCRIPTS / f"{name}.py")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


@pytest.fixture
def run_pipeline(monkeypatch):
    module = load_script("run_pipeline")
    calls = []

    def in_process(description, command):
        calls.append(command[3])
        return dispatch(command[3:]) == 0

    monkeypatch.setattr(module, "run_command", in_process)
    module.calls = calls
    return module


def test_pipeline_runs_every_step(run_pipeline, tmp_path):
    root = tmp_path / "run"
    assert run_pipeline.main(["--out", str(root), "--length", "120", "--n-max", "5", "--step", "0.5"])
    assert run_pipeline.calls == ["synth", "sweep", "compare", "baseline"]
    best_q = json.loads((root / "sweep" / "summary.json").read_text())["best_q"]
    assert json.loads((root / "compare" / "summary.json").read_text())["q"] == best_q
    assert (root / "baseline" / "baseline.csv").exists()


def test_pipeline_stops_at_first_failure(run_pipeline, tmp_path):
    assert not run_pipeline.main(["--out", str(tmp_path / "run"), "--length", "10", "--n-max", "5"])
    assert run_pipeline.calls == ["synth"]


def test_check_signal_error(tmp_path, capsys):
    out = tmp_path / "synth"
    dispatch(["synth", "--length", "50", "--n-max", "3", "--out", str(out)])
    script = load_script("check_signal_error")
    assert script.main([str(out / "mixed.csv"), str(out / "signal.csv")]) == 0
    assert "Error norm:" in capsys.readouterr().out
    assert script.main([str(out / "mixed.csv")]) == 1
    assert script.main([str(out / "mixed.csv"), str(tmp_path / "absent.csv")]) == 1
