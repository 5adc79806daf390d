import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from vinetrunc.cli import main, pseudo_obs
from vinetrunc.errors import NonNumericInput
from vinetrunc.structure import dvine
from vinetrunc.vine import Dataset, gaussian_from_taus, load_model, log_likelihood, save_model


@pytest.fixture
def model3(tmp_path):
    path = tmp_path / "true.json"
    save_model(gaussian_from_taus(dvine(3), (0.2, 0.2)), path)
    return path


def run(*argv):
    return main([str(a) for a in argv])


def test_pseudo_obs_examples():
    assert pseudo_obs([[3.2], [1.1], [7.5]])[:, 0].tolist() == [0.5, 0.25, 0.75]
    assert pseudo_obs(np.full((5, 1), 2.0))[:, 0].tolist() == [0.5] * 5
    assert np.allclose(pseudo_obs(np.arange(9.0)[:, None])[:, 0], np.arange(1, 10) / 10)
    with pytest.raises(NonNumericInput):
        pseudo_obs([[1.0]])
    with pytest.raises(NonNumericInput):
        pseudo_obs([[1.0], [np.nan]])


@settings(max_examples=30)
@given(st.integers(2, 40), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_pseudo_obs_properties(n, d, seed):
    x = np.round(np.random.default_rng(seed).normal(size=(n, d)), 1)
    u = pseudo_obs(x)
    assert np.all((u > 0) & (u < 1))
    assert np.allclose(u.sum(axis=0) * (n + 1), n * (n + 1) / 2)


def test_pseudo_obs_command(tmp_path):
    raw = tmp_path / "raw.csv"
    raw.write_text("a,b\n3.2,1\n1.1,1\n7.5,2\n")
    assert run("pseudo-obs", "--data", raw, "--out", tmp_path / "u.csv") == 0
    assert (tmp_path / "u.csv").read_text() == "u1,u2\n0.5,0.375\n0.25,0.375\n0.75,0.75\n"
    raw.write_text("a\n1\nfoo\n")
    assert run("pseudo-obs", "--data", raw, "--out", tmp_path / "v.csv") == 2


def test_simulate(tmp_path, model3):
    assert run("simulate", "--model", model3, "--n", 0, "--seed", 1, "--out", tmp_path / "e.csv") == 0
    assert (tmp_path / "e.csv").read_text() == "u1,u2,u3\n"
    for name in ("a.csv", "b.csv"):
        assert run("simulate", "--model", model3, "--n", 20000, "--seed", 5, "--out", tmp_path / name) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    u = Dataset.from_csv(tmp_path / "a.csv").values
    assert abs(stats.kendalltau(u[:, 0], u[:, 1]).statistic - 0.2) < 0.02


def test_fit_roundtrip(tmp_path, model3, capsys):
    data = tmp_path / "d.csv"
    run("simulate", "--model", model3, "--n", 3000, "--seed", 2, "--out", data)
    out = tmp_path / "fit.json"
    assert run("fit", "--data", data, "--structure", "dvine", "--trunc", 2, "--out", out) == 0
    text = capsys.readouterr().out
    fitted = load_model(out)
    ll = log_likelihood(fitted, Dataset.from_csv(data))
    printed = float(text.split("loglik ")[1].split()[0])
    assert printed == pytest.approx(ll, rel=1e-9)
    assert np.all(np.abs(fitted.parameters() - load_model(model3).parameters()) < 0.06)
    assert run("fit", "--data", data, "--structure", "file", "--model", out, "--trunc", 2,
               "--out", tmp_path / "again.json") == 0
    assert log_likelihood(load_model(tmp_path / "again.json"), Dataset.from_csv(data)) == pytest.approx(ll, abs=1e-8)
    assert load_model(out) == fitted
    assert abs(log_likelihood(load_model(out), Dataset.from_csv(data)) - ll) <= 1e-12


def test_fit_trunc_zero_and_mismatch(tmp_path, model3, capsys):
    data = tmp_path / "d.csv"
    run("simulate", "--model", model3, "--n", 50, "--seed", 3, "--out", data)
    assert run("fit", "--data", data, "--trunc", 0, "--out", tmp_path / "z.json") == 0
    assert "loglik 0 " in capsys.readouterr().out
    assert load_model(tmp_path / "z.json").n_params == 0
    four = tmp_path / "four.json"
    save_model(gaussian_from_taus(dvine(4), (0.2, 0.1, 0.0)), four)
    assert run("fit", "--data", data, "--structure", "file", "--model", four, "--trunc", 1) == 2
    assert "DimensionMismatch" in capsys.readouterr().err
    assert run("fit", "--data", data, "--structure", "file", "--trunc", 1) == 2


def test_vuong_command(tmp_path, model3, capsys):
    data = tmp_path / "d.csv"
    run("simulate", "--model", model3, "--n", 500, "--seed", 4, "--out", data)
    run("fit", "--data", data, "--trunc", 1, "--out", tmp_path / "g.json")
    run("fit", "--data", data, "--trunc", 2, "--out", tmp_path / "f.json")
    capsys.readouterr()
    report = tmp_path / "r.json"
    assert run("vuong", "--data", data, "--small", tmp_path / "g.json", "--large", tmp_path / "f.json",
               "--refit", "--out", report) == 0
    doc = json.loads(report.read_text())
    assert json.loads(capsys.readouterr().out) == doc
    assert doc["loglik_large"] >= doc["loglik_small"]
    nested, snn = doc["nested"], doc["snn"]
    assert nested["statistic"] == 2 * nested["lr"] and len(nested["eigenvalues"]) == 5
    assert nested["decision"] == ("PreferLarger" if nested["p_value"] < 0.05 else "PreferSmaller")
    crit = stats.norm.ppf(0.975)
    expected = ("Indistinguishable" if abs(snn["statistic"]) <= crit
                else "PreferLarger" if snn["statistic"] > 0 else "PreferSmaller")
    assert snn["decision"] == expected


def test_vuong_errors(tmp_path, model3, capsys):
    data = tmp_path / "d.csv"
    run("simulate", "--model", model3, "--n", 100, "--seed", 4, "--out", data)
    assert run("vuong", "--data", data, "--small", model3, "--large", model3, "--test", "snn") == 3
    assert "ZeroVariance" in capsys.readouterr().err
    small = tmp_path / "g.json"
    save_model(gaussian_from_taus(dvine(3), (0.2, 0.0)), small)
    assert run("vuong", "--data", data, "--small", model3, "--large", small, "--test", "nested") == 2
    assert "NotNested" in capsys.readouterr().err
    assert run("vuong", "--data", tmp_path / "missing.csv", "--small", model3, "--large", model3) == 4
    (tmp_path / "bad.json").write_text("{not json")
    assert run("vuong", "--data", data, "--small", tmp_path / "bad.json", "--large", model3) == 2


def test_experiment_and_report(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"R": 3, "scenarios": [{"study": "ThreeD", "taus": [0.2, 0.08], "n": 100}]}))
    out = tmp_path / "out"
    assert run("experiment", "--config", cfg, "--out", out, "--threads", 1) == 0
    summary = (out / "summary.csv").read_bytes()
    assert run("report", "--records", out) == 0
    assert (out / "summary.csv").read_bytes() == summary
    assert capsys.readouterr().out.endswith(summary.decode())
    lines = summary.decode().splitlines()
    assert len(lines) == 2 and lines[1].startswith("ThreeD,0.2,0.08,,100,3,")


def test_console_script(tmp_path, model3):
    res = subprocess.run([sys.executable, "-m", "vinetrunc", "simulate", "--model", str(model3), "--n", "3",
                          "--seed", "9", "--out", str(tmp_path / "s.csv")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 4
    res = subprocess.run([sys.executable, "-m", "vinetrunc", "simulate"], capture_output=True, text=True)
    assert res.returncode == 2
