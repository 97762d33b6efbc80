import json
import subprocess
import sys
from pathlib import Path

import pytest

from polyhom import __version__
from polyhom.cli import main

QUAD20 = Path(__file__).resolve().parents[1] / "fixtures" / "quad20.json"


@pytest.fixture(autouse=True)
def _no_thread_env(monkeypatch):
    monkeypatch.delenv("POLYHOM_THREADS", raising=False)


def write_config(tmp_path, **over):
    data = json.loads(QUAD20.read_text())
    data.update(over)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(data))
    return p


def test_version_via_module():
    out = subprocess.run([sys.executable, "-m", "polyhom", "--version"], capture_output=True, text=True)
    assert out.returncode == 0
    assert out.stdout.strip() == f"polyhom {__version__}"


def test_phantom_check_passes(tmp_path, capsys):
    assert main(["phantom-check", "--config", str(QUAD20), "--output", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "identity holds to 1e-10" in out
    assert (tmp_path / "results.csv").is_file()
    assert json.loads((tmp_path / "summary.json").read_text())["passed"]


def test_phantom_check_failure_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, pair={"kind": "kuhn-grun-p10"})
    assert main(["phantom-check", "--config", str(cfg), "--output", str(tmp_path / "o")]) == 1
    assert "failed" in capsys.readouterr().out


def test_usage_errors_exit_2(tmp_path, capsys):
    assert main(["phantom-check", "--config", str(tmp_path / "missing.json")]) == 2
    assert "not found" in capsys.readouterr().err
    assert main(["no-such-command"]) == 2
    assert main(["phantom-check", "--config", str(QUAD20), "--bogus"]) == 2
    bad = write_config(tmp_path, kind="w-inf-convergence", windows=[8, 16], domain=None)
    assert main(["zero-temp", "sweep", "--config", str(bad)]) == 2
    assert "usage error" in capsys.readouterr().err
    # kind mismatch
    assert main(["gap-sweep", "--config", str(QUAD20)]) == 2


def test_graph_generate_and_validate(tmp_path, capsys):
    assert main(["graph", "generate", "--window", "30", "--seed", "3", "--output", str(tmp_path)]) == 0
    g = tmp_path / "graph.json"
    assert g.is_file()
    assert main(["graph", "validate", str(g), "--pairs", "20", "--output", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "validation.json").read_text())
    assert main(["graph", "generate", "--window", "1", "2", "3"]) == 2


def test_energy_commands(tmp_path, capsys):
    cfg = write_config(tmp_path, pair={"kind": "kuhn-grun-p10"}, graph={"seed": 5}, volumetric={"weight": 0.01})
    out = tmp_path / "o"
    assert main(["energy", "eval", "--config", str(cfg), "--output", str(out)]) == 0
    assert len((out / "energy_eval.csv").read_text().splitlines()) == 6
    assert main(["energy", "grad-check", "--config", str(cfg), "--output", str(out), "--samples", "2",
                 "--noise", "0.05"]) == 0
    assert "within" in capsys.readouterr().out


def test_minimize_and_free_energy(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["zero-temp", "minimize", "--config", str(QUAD20), "--output", str(out)]) == 0
    rows = json.loads((out / "minimize.json").read_text())
    assert len(rows) == 5 and all(r["converged"] for r in rows)
    assert main(["free-energy", "exact", "--config", str(QUAD20), "--output", str(out), "--beta", "2",
                 "--beta", "20"]) == 0
    est = json.loads((out / "free_energy_exact.json").read_text())
    assert len(est) == 10 and est[0]["method"] == "exact-gaussian"


def test_study_run_with_threads(tmp_path, capsys):
    assert main(["study", "run", "--config", str(QUAD20), "--output", str(tmp_path), "--threads", "2",
                 "--fresh"]) == 0
    assert "identity: pass" in capsys.readouterr().out
