import json

import numpy as np
import pytest
import yaml

from ofspi.cli import main
from ofspi.config import ConfigError, ExperimentConfig, demo_config
from ofspi.pipeline import ITERATION_COLUMNS


@pytest.fixture(scope="module")
def demo_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("demo")
    assert main(["demo", "--out", str(out), "--config", str(out / "demo.yaml")]) == 0
    return out


def _edit(src, dst, **changes):
    d = yaml.safe_load(src.read_text())
    for key, val in changes.items():
        d[key] = val
    dst.write_text(yaml.safe_dump(d))
    return dst


def test_demo_writes_artifacts(demo_dir):
    for name in ("iterations.csv", "result.json", "data_log.csv", "trajectory.csv", "demo.yaml"):
        assert (demo_dir / name).is_file()
    header = (demo_dir / "iterations.csv").read_text().splitlines()[0].split(",")
    assert header == ITERATION_COLUMNS
    rec = json.loads((demo_dir / "result.json").read_text())
    assert rec["termination"] == "converged" and rec["c_final"] >= 1.0
    assert rec["rank"]["achieved"] == rec["rank"]["required"] == 28
    assert rec["verification"]["all_passed"]
    assert 0.9 < rec["verification"]["final_rho"] < 1.0


def test_demo_prints_summary(tmp_path, capsys):
    assert main(["demo", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "closed-loop rho=" in out and "certificates pass" in out


def test_run_reproduces_demo_bytes(demo_dir, tmp_path):
    assert main(["run", "--config", str(demo_dir / "demo.yaml"), "--out", str(tmp_path)]) == 0
    for name in ("iterations.csv", "result.json"):
        assert (tmp_path / name).read_bytes() == (demo_dir / name).read_bytes()


def test_short_horizon_reports_rank(demo_dir, tmp_path, capsys):
    cfg = _edit(demo_dir / "demo.yaml", tmp_path / "short.yaml", samples=2)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "[rank]" in err and "required rank 28" in err and "34" in err


def test_bad_delta_rejected(demo_dir, tmp_path, capsys):
    cfg = _edit(demo_dir / "demo.yaml", tmp_path / "bad.yaml", delta=1.5)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "δ must lie in (0,1)" in capsys.readouterr().err
    assert not (tmp_path / "o" / "result.json").exists()


def test_config_errors_listed_together():
    cfg = demo_config()
    cfg.delta = 0.0
    cfg.samples = 0
    cfg.roots = [-0.1, 1.5, -0.3]
    cfg.R = [[1.0, 0.0], [0.0, 1.0]]
    with pytest.raises(ConfigError) as exc:
        cfg.validate()
    text = "\n".join(exc.value.problems)
    for fragment in ("δ must lie", "samples must be positive", "unit circle", "R must be 1x1"):
        assert fragment in text


def test_unknown_keys_rejected():
    d = demo_config().to_dict()
    d["learning_rate"] = 0.1
    with pytest.raises(ConfigError, match="unknown keys"):
        ExperimentConfig.from_dict(d)


def test_yaml_round_trip(tmp_path):
    cfg = demo_config()
    cfg.dump(tmp_path / "c.yaml")
    assert ExperimentConfig.load(tmp_path / "c.yaml").to_dict() == cfg.to_dict()


def test_verify_passes(demo_dir, capsys):
    assert main(["verify", str(demo_dir)]) == 0
    out = capsys.readouterr().out
    assert "verification passed" in out and "FAIL" not in out


def test_verify_flags_destabilizing_gain(demo_dir, tmp_path, capsys):
    rec = json.loads((demo_dir / "result.json").read_text())
    rec["gain"] = (-np.asarray(rec["gain"])).tolist()
    (tmp_path / "result.json").write_text(json.dumps(rec))
    assert main(["verify", str(tmp_path / "result.json")]) == 1
    assert "NOT stable, rho >= 1" in capsys.readouterr().out


def test_verify_flags_non_terminated_run(demo_dir, tmp_path, capsys):
    rec = json.loads((demo_dir / "result.json").read_text())
    rec["c_final"] = 0.95
    (tmp_path / "result.json").write_text(json.dumps(rec))
    assert main(["verify", str(tmp_path)]) == 1
    assert "non-terminated run" in capsys.readouterr().out


def test_verify_missing_artifacts(tmp_path, capsys):
    assert main(["verify", str(tmp_path)]) == 2
    assert "missing or unreadable" in capsys.readouterr().err


def test_run_missing_config(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path)]) == 2
    assert "[config]" in capsys.readouterr().err


def test_delta_sweep(tmp_path):
    assert main(["demo", "--sweep-delta", "--no-verify", "--out", str(tmp_path)]) == 0
    runs = sorted(p.parent.name for p in tmp_path.glob("delta_*/iterations.csv"))
    assert runs == ["delta_0.1", "delta_0.4", "delta_0.7", "delta_0.9"]
    counts = {r: len((tmp_path / r / "iterations.csv").read_text().splitlines()) for r in runs}
    assert counts["delta_0.1"] <= counts["delta_0.9"]
    assert not (tmp_path / "delta_0.1" / "trajectory.csv").exists()


def test_seed_override_changes_data(tmp_path):
    assert main(["demo", "--no-verify", "--seed", "3", "--out", str(tmp_path / "a")]) == 0
    assert main(["demo", "--no-verify", "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "data_log.csv").read_text()
    b = (tmp_path / "b" / "data_log.csv").read_text()
    assert a != b
