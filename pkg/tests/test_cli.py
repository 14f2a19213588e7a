import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from gnnkit import autograd as ag
from gnnkit.cli import build_config, main
from gnnkit.data import write_edge_list
from gnnkit.graph import build_graph
from gnnkit.training import ConfigError

FAST_LINK = ["--set", "dataset=two_clique", "--set", "synth_size=40", "--set", "epochs=20"]


def test_train_link_writes_outputs(tmp_path, capsys):
    assert main(["train-link", *FAST_LINK, "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["task"] == "link"
    assert "embedding" not in report["extras"]
    rows = list(csv.DictReader((tmp_path / "metrics.csv").open()))
    assert len(rows) == 1 and 0 <= float(rows[0]["auc"]) <= 1
    emb = np.loadtxt(tmp_path / "embeddings.csv", delimiter=",", skiprows=1)
    assert emb.shape[0] == 40
    assert "auc=" in capsys.readouterr().out


def test_repeats_summary_and_append(tmp_path):
    args = ["train-node", "--set", "dataset=two_clique", "--set", "synth_size=40",
            "--set", "epochs=10", "--out", str(tmp_path), "--repeats", "2"]
    assert main(args) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["summary"]["accuracy"]["n"] == 2
    assert [r["config"]["seed"] for r in report["runs"]] == [0, 1]
    assert main(args + ["--append"]) == 0
    assert len(list(csv.DictReader((tmp_path / "metrics.csv").open()))) == 4
    assert main(args) == 0
    assert len(list(csv.DictReader((tmp_path / "metrics.csv").open()))) == 2


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"dataset": "two_clique", "epochs": 7, "lr": 0.05}))
    c = build_config("link", cfg, ["epochs=3"], seed=4)
    assert (c.epochs, c.lr, c.seed, c.task) == (3, 0.05, 4, "link")


def test_config_task_mismatch(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"task": "node"}))
    with pytest.raises(ConfigError, match="task"):
        build_config("link", cfg)


@pytest.mark.parametrize("args", [
    ["train-link", "--set", "dataset=stargazers"],
    ["train-link", "--set", "epochs=-1"],
    ["train-link", "--set", "bogus=1"],
    ["train-link", "--set", "noequals"],
    ["train-link", "--config", "/nonexistent/config.json"],
])
def test_config_errors_exit_2(args, tmp_path, capsys):
    assert main(args + ["--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_dataset_exits_3_with_hint(tmp_path, capsys):
    rc = main(["train-link", "--set", "dataset=cora", "--set", f"data_dir={tmp_path}",
               "--out", str(tmp_path)])
    assert rc == 3
    err = capsys.readouterr().err
    assert "not found" in err and "fetch_datasets" in err


def test_spectral_demo_worked_example(tmp_path, capsys):
    out = tmp_path / "spec.csv"
    assert main(["spectral-demo", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 5
    lams = [float(r["lambda"]) for r in rows]
    np.testing.assert_allclose(lams, [0, 0.6972243622680054, 1.381966011250105,
                                      3.618033988749895, 4.302775637731995], atol=1e-10)
    assert "residual" in capsys.readouterr().err


def test_spectral_demo_constant_signal(tmp_path):
    g = build_graph(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)])
    gpath = write_edge_list(g, tmp_path / "ring.txt")
    sig = tmp_path / "sig.csv"
    sig.write_text("value\n" + "2.0\n" * 6)
    out = tmp_path / "spec.csv"
    assert main(["spectral-demo", "--graph", str(gpath), "--signal", str(sig),
                 "--column", "value", "--out", str(out)]) == 0
    coef = np.array([float(r["coefficient"]) for r in csv.DictReader(out.open())])
    assert abs(abs(coef[0]) - 2.0 * np.sqrt(6)) < 1e-10
    np.testing.assert_allclose(coef[1:], 0, atol=1e-10)


def test_spectral_demo_signal_length_mismatch(tmp_path, capsys):
    sig = tmp_path / "sig.csv"
    sig.write_text("1\n2\n")
    assert main(["spectral-demo", "--signal", str(sig)]) == 2


def test_gradcheck_passes(capsys):
    assert main(["gradcheck", "--instances", "2"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "PASS  tanh" in out


def test_gradcheck_detects_corrupted_rule(monkeypatch, capsys):
    real = ag.record

    def corrupt(data, name, parents, back, **saved):
        if name == "tanh":
            return real(data, name, parents, lambda g: tuple(1.1 * x for x in back(g)), **saved)
        return real(data, name, parents, back, **saved)

    monkeypatch.setattr(ag, "record", corrupt)
    assert main(["gradcheck", "--instances", "2"]) == 3
    lines = capsys.readouterr().out.splitlines()
    failed = [ln.split()[1] for ln in lines if ln.startswith("FAIL")]
    assert "tanh" in failed
    assert "relu" not in failed


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "gnnkit.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "train-link" in proc.stdout
