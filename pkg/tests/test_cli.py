import csv
import io
import json

import pytest

from consensus_lab.cli import main


def invoke(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analyze_golden(capsys, data_dir):
    code, out, _ = invoke(["analyze", "--channel", str(data_dir / "fig3_shuffled.json")], capsys)
    assert code == 0
    d = json.loads(out)
    r = d["result"]
    assert sorted(r["effective_alphabet"]) == ["0", "1"]
    assert r["eta"] == pytest.approx(0.5)
    assert r["gamma"] == pytest.approx(1.0)
    assert d["config"]["command"] == "analyze"
    assert d["config"]["seed"] == 0


def test_analyze_singleton(capsys):
    code, out, _ = invoke(["analyze", "--family", "two-step-bec", "--param", "p=1", "--param", "q=0.3"], capsys)
    r = json.loads(out)["result"]
    assert code == 0
    assert r["components"]["count"] == 1
    assert r["singleton_effective_alphabet"]


def test_malformed_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    code, _, err = invoke(["analyze", "--channel", str(bad)], capsys)
    assert code == 2
    assert "invalid JSON" in err


def test_missing_params_is_usage_error(capsys):
    assert invoke(["capacity", "--family", "fig3"], capsys)[0] == 2
    assert invoke(["capacity"], capsys)[0] == 2


def test_capacity_sweep_csv(capsys, tmp_path):
    png = tmp_path / "sweep.png"
    code, out, _ = invoke(["capacity", "--family", "fig3", "--sweep", "p=0.1:0.5:0.2", "--plot", str(png)], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# consensus-lab capacity-sweep schema_version=")
    assert lines[1].startswith("# config=")
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[2:]))))
    assert [float(r["value"]) for r in rows] == [0.1, 0.3, 0.5]
    byz = [float(r["c_byz"]) for r in rows]
    assert byz[0] == pytest.approx(1.0, abs=1e-3)
    assert byz[2] == pytest.approx(0.0, abs=1e-3)
    assert png.stat().st_size > 0


def test_two_step_sweep_line(capsys):
    code, out, _ = invoke(["capacity", "--family", "two-step-bec", "--param", "p=0.5", "--sweep", "q=0.2:0.6:0.2"], capsys)
    rows = list(csv.DictReader(io.StringIO("\n".join(out.splitlines()[2:]))))
    for r in rows:
        q = float(r["value"])
        assert float(r["c_byz"]) == pytest.approx(1 - 0.5 * q, abs=1e-3)
        assert float(r["c_com_msg"]) == pytest.approx(1 - 0.5 * q, abs=1e-3)


def test_oracle_pinned(capsys):
    code, out, _ = invoke(["oracle", "--family", "independent-bec", "--param", "q=0.5"], capsys)
    assert code == 0
    assert json.loads(out)["result"]["value"] == 0.5


def test_budget_exit_code(capsys):
    assert invoke(["oracle", "--family", "identity", "-n", "3", "--budget", "10"], capsys)[0] == 4


def test_simulate_replay_identical(tmp_path, capsys):
    cb = tmp_path / "cb.json"
    assert invoke(["codebook", "--kind", "linear", "-n", "12", "--rate", "0.25", "--code-distance", "4", "-o", str(cb)], capsys)[0] == 0
    out1 = tmp_path / "sim.json"
    args = ["--seed", "5", "simulate", "--family", "two-step-bec", "--param", "p=0.5", "--param", "q=0.5",
            "--codebook", str(cb), "--delta", "0.2", "--trials", "1500", "-o", str(out1)]
    assert invoke(args, capsys)[0] == 0
    out2 = tmp_path / "replay.json"
    assert invoke(["replay", str(out1), "-o", str(out2)], capsys)[0] == 0
    assert out1.read_bytes() == out2.read_bytes()
    d = json.loads(out1.read_text())
    assert d["config"]["seed"] == 5
    assert d["result"]["p_e"] == max(d["result"]["lambda_max"], d["result"]["eta_max"])


def test_seed_env_override(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("CONSENSUS_LAB_SEED", "99")
    code, out, _ = invoke(["attack", "--family", "two-step-bec", "--param", "p=0.5", "--param", "q=0.5",
                           "-n", "16", "--rate", "0.25", "--strategy", "boundary", "--flips", "2", "--count", "3"], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["config"]["seed"] == 99
    assert len(d["vectors"]) == 3
    assert all(len(v) == 16 for v in d["vectors"])


def test_exact_simulate(capsys):
    code, out, _ = invoke(["simulate", "--family", "two-step-bec", "--param", "p=0.5", "--param", "q=0.5",
                           "-n", "5", "--rate", "0.4", "--delta", "0.2", "--exact", "--exhaustive"], capsys)
    assert code == 0
    r = json.loads(out)["result"]
    assert r["exact"] and r["eta_regime"] == "exhaustive"


def test_curve_csv(capsys):
    code, out, _ = invoke(["simulate", "--family", "two-step-bec", "--param", "p=0.5", "--param", "q=0.5",
                           "--rate", "0.3", "--delta", "0.1", "--curve", "--n-grid", "32,48", "--trials", "300",
                           "--attacks", "none"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert "schema_version=" in lines[0]
    assert lines[2] == "n,lambda_hat,eta_hat,p_e_hat,ci"
    assert len(lines) == 5
