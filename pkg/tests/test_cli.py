import json

import numpy as np
import pytest
from click.testing import CliRunner

from turing_passage.cli import main, read_snapshots


def _run(args, env=None):
    res = CliRunner().invoke(main, args, env=env, catch_exceptions=False)
    return res


def _config(tmp_path, text):
    p = tmp_path / "run.ini"
    p.write_text(text)
    return str(p)


def test_derive_order_four(tmp_path):
    res = _run(["derive", "--order", "4", "--out", str(tmp_path)])
    assert res.exit_code == 0
    assert "A[3,1] = -1/64 * A[1,1]*A[1,1]*A[1,1]" in res.output
    assert (tmp_path / "hierarchy_n4.txt").read_text() == res.output
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["files"] == ["hierarchy_n4.txt"]


def test_bad_config_reports_constraint(tmp_path):
    cfg = _config(tmp_path, "[physics]\neps = -1\n")
    res = CliRunner().invoke(main, ["simulate", "--config", cfg, "--out", str(tmp_path)])
    assert res.exit_code != 0
    assert "eps must be in (0,1)" in res.output


def test_simulate_is_byte_identical(tmp_path):
    cfg = _config(tmp_path, "perturbation = 0.01\nseed = 3\n[physics]\neps = 0.02\nnu = 1:0.01\n")
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert _run(["simulate", "--config", cfg, "--out", str(out)]).exit_code == 0
        outs.append(out)
    for f in ("observables.csv", "sections.csv", "plot_norm_vs_v.csv", "snapshots.bin"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
    text = (outs[0] / "observables.csv").read_bytes()
    assert b"\r" not in text and text.startswith(b"t,v,hul_norm,max_abs,mode1_abs\n")
    manifest = json.loads((outs[0] / "manifest.json").read_text())
    assert set(manifest["files"]) == {"observables.csv", "sections.csv", "plot_norm_vs_v.csv",
                                      "snapshots.bin", "snapshots.json"}
    assert len(manifest["spec_hash"]) == 64


def test_snapshot_round_trip(tmp_path):
    cfg = _config(tmp_path, "[physics]\neps = 0.02\n")
    assert _run(["simulate", "--config", cfg, "--out", str(tmp_path)]).exit_code == 0
    recs = read_snapshots(tmp_path / "snapshots.bin")
    assert len(recs) == 2
    t, v, modes = recs[0]
    assert (t, v) == (0.0, -1.0)
    assert modes.shape == (32,)
    assert abs(modes[1]) > 0 and np.allclose(modes[1], np.conj(modes[-1]))
    t_mid = (1 + 0.02 ** 0.5 * 0.1 ** -0.5) / 0.02
    assert recs[1][0] == pytest.approx(t_mid, rel=1e-14)


def test_out_dir_from_environment(tmp_path):
    target = tmp_path / "env"
    cfg = _config(tmp_path, "[physics]\neps = 0.02\n")
    res = _run(["approx", "--config", cfg, "--out", str(tmp_path / "flag")],
               env={"TP_OUT_DIR": str(target)})
    assert res.exit_code == 0
    assert (target / "passage.csv").exists() and not (tmp_path / "flag").exists()


def test_compare(tmp_path):
    cfg = _config(tmp_path, "[physics]\neps = 0.01\nnu = 1:0.002\n")
    res = _run(["compare", "--config", cfg, "--out", str(tmp_path)])
    assert res.exit_code == 0
    lines = (tmp_path / "compare.csv").read_text().splitlines()
    assert lines[0] == "section,t,v,norm_u,norm_psi,error"
    assert [l.split(",")[0] for l in lines[1:]] == ["in", "mid"]
    assert float(lines[1].split(",")[-1]) == 0.0


def test_sweep_serial_equals_parallel(tmp_path):
    cfg = _config(tmp_path, "experiment = dynamic\neps_list = 0.08, 0.06, 0.04, 0.02\n"
                            "[physics]\nnu = 1:0.002\n")
    a, b = tmp_path / "serial", tmp_path / "parallel"
    assert _run(["sweep", "--config", cfg, "--out", str(a), "--workers", "1"]).exit_code == 0
    assert _run(["sweep", "--config", cfg, "--out", str(b), "--workers", "4"]).exit_code == 0
    for f in ("sweep_dynamic.csv", "plot_dynamic.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    head = (a / "sweep_dynamic.csv").read_text().splitlines()
    assert head[0].startswith("# claim:") and head[1].startswith("# fit:")
    assert head[2] == "eps,n,seed,t_mid,error,norm_u,norm_psi"


def test_verify_exit_status(tmp_path):
    res = CliRunner().invoke(main, ["verify", "--only", "1,7", "--out", str(tmp_path)])
    assert res.exit_code == 0
    assert "PASS [ 1]" in res.output and "PASS [ 7]" in res.output
    rows = (tmp_path / "verify.csv").read_text().splitlines()
    assert len(rows) == 3
