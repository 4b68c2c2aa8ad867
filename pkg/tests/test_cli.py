import csv
import json
import math
import subprocess
import sys

import pytest

from swarmseek import cli
from swarmseek.config import RunConfig, parse_config
from swarmseek.verify import VerificationReport

HEADER = "t,rc_x,rc_y,dist,sigma_rc,grad_norm,deformation,theta,guiding_defined"


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_run_default_csv(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["run", "--out", str(out)]) == 0
    lines = (out / "trajectory.csv").read_text().splitlines()
    assert lines[0] == HEADER
    assert len(lines) - 1 == math.floor(100 / 0.1) + 1
    rows = list(csv.DictReader((out / "trajectory.csv").open()))
    assert float(rows[0]["t"]) == 0.0 and float(rows[-1]["t"]) == 100.0
    # shortest round-trip formatting
    for v in lines[1].split(","):
        assert repr(float(v)) == v or v in ("0", "1")
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["samples"] == 1001 and metrics["error"] is None
    assert parse_config((out / "config.json").read_text()) == RunConfig(output={"dir": str(out)})


def test_run_is_byte_identical(tmp_path):
    cfg = write(tmp_path, {"sim": {"mode": "unicycle", "t_end": 30}})
    out = tmp_path / "o"
    snapshots = []
    for _ in range(2):
        assert cli.main(["run", "--config", cfg, "--seed", "9", "--out", str(out)]) == 0
        snapshots.append({p.name: p.read_bytes() for p in out.iterdir()})
    assert snapshots[0] == snapshots[1]
    assert set(snapshots[0]) == {"trajectory.csv", "metrics.json", "config.json"}


def test_seed_changes_output(tmp_path):
    cli.main(["run", "--seed", "1", "--out", str(tmp_path / "a")])
    cli.main(["--seed", "2", "run", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() != (tmp_path / "b" / "trajectory.csv").read_bytes()
    assert json.loads((tmp_path / "b" / "metrics.json").read_text())["seed"] == 2


def test_json_format(tmp_path):
    cfg = write(tmp_path, {"sim.t_end": 1.0, "field.source": [0, 0, 0]})
    assert cli.main(["run", "--config", cfg, "--format", "json", "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "trajectory.json").read_text())
    assert data["columns"][:4] == ["t", "rc_x", "rc_y", "rc_z"]
    assert len(data["rows"]) == 11


@pytest.mark.parametrize(
    "content", ['{"sim": {"u_r": -1}}', '{"sim": {"nope": 1}}', '{"sim": ', '{"field.kind": "quadratic"}']
)
def test_config_errors_exit_2(tmp_path, content, capsys):
    p = tmp_path / "bad.json"
    p.write_text(content)
    assert cli.main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path, capsys):
    assert cli.main(["run", "--config", str(tmp_path / "none.json")]) == 2
    assert "none.json" in capsys.readouterr().err


def test_singular_initial_state_exit_2(tmp_path):
    cfg = write(tmp_path, {"sim.mode": "unicycle", "ascent.direction": "exact",
                           "swarm.positions": [[1, 0], [-1, 0], [0, 1], [0, -1]], "swarm.headings": [0, 0, 0, 0]})
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_simulation_error_exit_3_keeps_partial(tmp_path):
    cfg = write(tmp_path, {"sim": {"mode": "unicycle", "t_end": 10, "h_min": 5}})
    out = tmp_path / "o"
    assert cli.main(["run", "--config", cfg, "--out", str(out)]) == 3
    metrics = json.loads((out / "metrics.json").read_text())
    assert "h_min" in metrics["error"]
    assert (out / "trajectory.csv").read_text().startswith(HEADER)


def test_unwritable_output_exit_3(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["run", "--out", str(blocker / "sub"), "--config", write(tmp_path, {"sim.t_end": 1})]) == 3
    assert str(blocker) in capsys.readouterr().err


def test_print_defaults(capsys):
    assert cli.main(["--print-defaults"]) == 0
    text = capsys.readouterr().out
    assert parse_config(text) == RunConfig()
    assert cli.main(["print-defaults"]) == 0
    assert capsys.readouterr().out == text


def test_no_command_is_usage_error():
    assert cli.main([]) == 2


def test_sweep_two_pairs(tmp_path):
    cfg = write(tmp_path, {"harness.preset": "kgamma_sweep", "sim.t_end": 60})
    out = tmp_path / "s"
    assert cli.main(["sweep", "--config", cfg, "--out", str(out), "--jobs", "2"]) == 0
    parallel = {p.name: p.read_bytes() for p in out.iterdir()}
    summary = json.loads((out / "sweep_summary.json").read_text())
    assert [s["k_gamma"] for s in summary] == [1.0, 10.0]
    for k in ("1", "10"):
        assert (out / f"k_gamma_{k}_run_000_trajectory.csv").exists()
        assert (out / f"k_gamma_{k}_run_000_metrics.json").exists()
    assert summary[1]["max_deformation"] < summary[0]["max_deformation"]
    # parallel and serial sweeps write the same bytes
    assert cli.main(["sweep", "--config", cfg, "--out", str(out), "--jobs", "1"]) == 0
    assert {p.name: p.read_bytes() for p in out.iterdir()} == parallel


def test_verify_exit_codes(tmp_path, monkeypatch):
    import swarmseek.verify as verify

    good = [VerificationReport("a", samples=3)]
    monkeypatch.setattr(verify, "verify_suite", lambda *a, **k: good)
    assert cli.main(["verify", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "verification.json").read_text())
    assert report["passed"] is True and report["reports"][0]["name"] == "a"
    bad = [VerificationReport("a", samples=3, violations=1, worst_margin=-1.0)]
    monkeypatch.setattr(verify, "verify_suite", lambda *a, **k: bad)
    assert cli.main(["verify", "--out", str(tmp_path)]) == 1


@pytest.mark.slow
def test_verify_end_to_end(tmp_path):
    cfg = write(tmp_path, {"harness.verify_samples": 300})
    proc = subprocess.run([sys.executable, "-m", "swarmseek.cli", "verify", "--config", cfg, "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert "FAIL" not in proc.stdout
    assert json.loads((tmp_path / "verification.json").read_text())["passed"]
