import os
import subprocess
import sys

import pytest

from levypot import config as C
from levypot import manifest as MF

BASE_CFG = """
# desk-scale check
[model]
kind = IsotropicStable
dim = 1
alpha = 1.5
tempering = 0

[run]
experiment = audit
seed = 7
n_paths = 2000
output_dir = {out}
"""


def run_cli(args, env_extra=None):
    env = dict(os.environ)
    env["LEVYPOT_TIMESTAMP"] = "2026-08-11T00:00:00"
    env.update(env_extra or {})
    return subprocess.run([sys.executable, "-m", "levypot.cli", *args],
                          capture_output=True, text=True, env=env)


def test_config_parse_roundtrip(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text(BASE_CFG.format(out=tmp_path / "o"))
    cfg = C.load_config(p)
    assert cfg.experiment == "audit"
    assert cfg.model.alpha == 1.5
    assert cfg.seed == 7


def test_config_rejects_bad_alpha(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text(BASE_CFG.format(out=tmp_path).replace("alpha = 1.5", "alpha = 2.5"))
    with pytest.raises(C.ConfigError) as err:
        C.load_config(p)
    assert "alpha" in str(err.value)


def test_config_rejects_unknown_experiment():
    with pytest.raises(C.ConfigError):
        C.parse_config_text("experiment = frobnicate")


def test_config_reports_line_numbers():
    with pytest.raises(C.ConfigError) as err:
        C.parse_config_text("experiment = audit\nalpha == oops")
    assert "line 2" in str(err.value)


def test_cli_bad_config_exit_code(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text(BASE_CFG.format(out=tmp_path / "o").replace("alpha = 1.5", "alpha = 2.5"))
    res = run_cli(["audit", "--config", str(p)])
    assert res.returncode == 1
    assert "alpha" in res.stderr


def test_cli_run_and_rerun_byte_identical(tmp_path):
    outs = []
    for name in ("runA", "runB"):
        p = tmp_path / f"{name}.cfg"
        p.write_text(BASE_CFG.format(out=tmp_path / name))
        res = run_cli(["audit", "--config", str(p)])
        assert res.returncode == 0, res.stderr
        outs.append(tmp_path / name)
    files = sorted(f.name for f in outs[0].iterdir())
    assert files == sorted(f.name for f in outs[1].iterdir())
    assert "audit.csv" in files and "manifest.txt" in files
    assert "audit.png" in files  # figure rendered alongside the CSV
    for name in files:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_cli_threads_invariance(tmp_path):
    # verify-harnack exercises the threaded report loops
    outs = []
    for name, threads in (("t1", "1"), ("t4", "4")):
        p = tmp_path / f"{name}.cfg"
        p.write_text(BASE_CFG.format(out=tmp_path / name)
                     .replace("experiment = audit", "experiment = verify-harnack"))
        res = run_cli(["verify-harnack", "--config", str(p)],
                      env_extra={"LEVYPOT_THREADS": threads})
        assert res.returncode == 0, res.stderr
        outs.append(tmp_path / name)
    for name in sorted(f.name for f in outs[0].iterdir()):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_manifest_verifies_and_detects_tampering(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text(BASE_CFG.format(out=tmp_path / "run"))
    res = run_cli(["audit", "--config", str(p)])
    assert res.returncode == 0
    info = MF.verify_manifest(tmp_path / "run" / "manifest.txt")
    assert "audit.csv" in info["outputs"]
    # tamper with an output: aggregate must refuse
    target = tmp_path / "run" / "audit.csv"
    target.write_text(target.read_text() + "tampered\n")
    with pytest.raises(MF.ManifestCorruption):
        MF.verify_manifest(tmp_path / "run" / "manifest.txt")
    res = run_cli(["aggregate", str(tmp_path / "run"),
                   "--out", str(tmp_path / "summary.csv")])
    assert res.returncode == 1
    assert "corruption" in res.stderr


def test_aggregate_collates_runs(tmp_path):
    dirs = []
    for name in ("r1", "r2"):
        p = tmp_path / f"{name}.cfg"
        p.write_text(BASE_CFG.format(out=tmp_path / name))
        assert run_cli(["audit", "--config", str(p)]).returncode == 0
        dirs.append(str(tmp_path / name))
    out = tmp_path / "summary.csv"
    res = run_cli(["aggregate", *dirs, "--out", str(out)])
    assert res.returncode == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "inequality,model,constant,ci,verdict"
    assert len(lines) > 2


def test_aggregate_empty_is_header_only(tmp_path):
    out = tmp_path / "summary.csv"
    res = run_cli(["aggregate", "--out", str(out)])
    assert res.returncode == 0
    assert out.read_text() == "inequality,model,constant,ci,verdict\n"


def test_cli_flag_overrides(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text(BASE_CFG.format(out=tmp_path / "ignored"))
    res = run_cli(["audit", "--config", str(p), "--out", str(tmp_path / "actual"),
                   "--seed", "99", "--no-plot"])
    assert res.returncode == 0
    assert (tmp_path / "actual" / "audit.csv").exists()
    assert not (tmp_path / "actual" / "audit.png").exists()
    manifest = MF.read_manifest(tmp_path / "actual" / "manifest.txt")
    assert "seed=99" in manifest["config"]


def test_threads_env_validation():
    res = run_cli(["aggregate"], env_extra={"LEVYPOT_THREADS": "zero"})
    assert res.returncode == 1


def test_verdict_failure_exit_code(tmp_path, monkeypatch):
    # a failing verdict must map to exit status 2, distinct from errors
    from levypot import cli, experiments

    def failing_runner(cfg, out_dir):
        sheet = experiments.VerdictSheet(cfg)
        sheet.add("synthetic-check", 1.0, 0.0, False)
        return [], sheet

    monkeypatch.setitem(experiments.RUNNERS, "audit", failing_runner)
    p = tmp_path / "c.cfg"
    p.write_text(BASE_CFG.format(out=tmp_path / "run"))
    args = cli.build_parser().parse_args(["audit", "--config", str(p)])
    assert cli.run_experiment(args) == 2
