import json
from pathlib import Path

import pytest
import yaml

from hydrolimit.bundle import ResultBundle, read_manifest
from hydrolimit.cli import main
from hydrolimit.config import ConfigError, from_dict, load_config

ROOT = Path(__file__).resolve().parents[1]
DEFAULT = ROOT / "configs" / "default.yaml"
BASE = {"eps": 0.1, "alpha": 0.05, "beta": 0.1, "ell": 2.0}


def write_config(tmp_path, **overrides):
    raw = {**BASE, "K": 3, "T": 0.05, "dt": 0.01, **overrides}
    raw = {k: v for k, v in raw.items() if v is not None}
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(raw))
    return path


def test_default_config_loads():
    cfg = load_config(DEFAULT)
    assert cfg.backend.kind == "bgk"
    assert cfg.eps_list == [0.2, 0.1, 0.05, 0.025]


@pytest.mark.parametrize("bad", [{"beta": 0.5}, {"beta": 0.6}, {"alpha": 0.25}, {"ell": 1.5},
                                 {"beta": 0.05, "alpha": 0.1}, {"eps": 0.0}, {"eps": 1.5}])
def test_out_of_range_rejected(bad):
    with pytest.raises(ConfigError):
        from_dict({**BASE, **bad})


def test_missing_and_unknown_keys():
    with pytest.raises(ConfigError, match="missing"):
        from_dict({"eps": 0.1})
    with pytest.raises(ConfigError, match="unknown"):
        from_dict({**BASE, "colour": "red"})
    with pytest.raises(ConfigError):
        from_dict({**BASE, "backend": {"kind": "hard-spheres"}})


def test_tolerance_overrides_merge():
    cfg = from_dict({**BASE, "tolerances": {"slope": 0.3}})
    assert cfg.tolerances["slope"] == 0.3
    assert cfg.tolerances["plateau"] == 0.01


@pytest.mark.parametrize("overrides", [{"beta": 0.5}, {"ell": None}, {"backend": {"kind": "nope"}}])
def test_cli_config_rejection_exit_2(tmp_path, overrides):
    assert main(["check", "--config", str(write_config(tmp_path, **overrides)), "--out", str(tmp_path)]) == 2


def test_cli_missing_file_exit_2(tmp_path):
    assert main(["check", "--config", str(tmp_path / "absent.yaml")]) == 2


def test_cli_numerical_failure_exit_1(tmp_path, capsys):
    path = write_config(tmp_path, eps=0.05, amplitude=1000.0, T=0.2)
    out = tmp_path / "out"
    assert main(["kinetic", "--config", str(path), "--out", str(out)]) == 1
    assert "numerical failure" in capsys.readouterr().err
    assert read_manifest(out)["verdicts"]["completed"] is False


def test_cli_check_pass_and_determinism(tmp_path, capsys):
    path = write_config(tmp_path)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["check", "--config", str(path), "--out", str(out), "--seed", "3"]) == 0
        outs.append(json.loads((out / "summary.json").read_text()))
    assert outs[0] == outs[1]
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("PASS") for line in lines)
    manifest = read_manifest(tmp_path / "a")
    assert manifest["config"]["seed"] == 3
    assert manifest["passed"] is True
    assert set(manifest["versions"]) == {"python", "numpy", "scipy"}


def test_cli_eps_override(tmp_path):
    path = write_config(tmp_path)
    out = tmp_path / "o"
    assert main(["kinetic", "--config", str(path), "--out", str(out), "--eps", "0.2"]) == 0
    assert read_manifest(out)["config"]["eps"] == 0.2
    assert (out / "norms.csv").read_text().startswith("t,h_half")


def test_bundle_round_trip(tmp_path):
    b = ResultBundle("demo", {"eps": 0.1})
    b.verdict("ok", True)
    b.summary["value"] = 1.5
    b.tables["rows"] = [{"eps": 0.1, "error": 0.25}]
    with b.timed("step"):
        pass
    b.write(tmp_path)
    m = read_manifest(tmp_path)
    assert m["command"] == "demo" and m["verdicts"] == {"ok": True} and m["tables"] == ["rows"]
    assert "step" in m["timings"]
    assert (tmp_path / "rows.csv").read_text().splitlines() == ["eps,error", "0.1,0.25"]
