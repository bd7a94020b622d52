import json
import subprocess
import sys

import yaml

from rombayes.cli import main
from test_pipeline import SMALL


def _write(tmp_path, data):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(data))
    return path


def test_run_and_seed_override(tmp_path, capsys):
    cfg = _write(tmp_path, dict(SMALL, smoother=dict(SMALL["smoother"], kind="enkf")))
    assert main(["run", "--config", str(cfg), "--output", str(tmp_path / "a"), "--seed", "5"]) == 0
    out = capsys.readouterr().out
    assert "wrote errors.csv" in out
    meta = json.loads((tmp_path / "a" / "report.json").read_text())
    assert meta["provenance"]["seeds"] == {"smoother": 5, "sensitivity": 6}


def test_partial_subcommand(tmp_path):
    cfg = _write(tmp_path, SMALL)
    assert main(["rom", "--config", str(cfg), "--output", str(tmp_path / "b")]) == 0
    caches = sorted(p.name.split("-")[0] for p in (tmp_path / "b" / "cache").iterdir())
    assert caches == ["pod", "rom", "simulate"]
    assert not (tmp_path / "b" / "report.json").exists()


def test_config_errors_exit_2(tmp_path, capsys):
    cfg = _write(tmp_path, {"smoother": {"bogus": 1}})
    assert main(["run", "--config", str(cfg)]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "rombayes", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("simulate", "pod", "rom", "identify", "sensitivity", "validate", "report", "run"):
        assert cmd in res.stdout
