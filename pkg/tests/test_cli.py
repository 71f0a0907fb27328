import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from riloss import cli, harness
from riloss.data import synthetic_seasonal, write_csv

SMALL = """\
[data]
synthetic = seasonal
synthetic_length = 400
w = 24
H = 12
snr_db = 0

[loss]
kind = {kind}
lambda = 10
tau = 1

[train]
epochs = 2
batch_size = 16
kernel_size = 5
seed = 3
"""


def write_config(tmp_path, kind="mse", extra="", name="run.ini"):
    p = tmp_path / name
    p.write_text(SMALL.format(kind=kind) + extra)
    return p


def run_cli(args, capsys):
    code = cli.main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


def fail_cli(args, capsys):
    with pytest.raises(SystemExit) as ei:
        cli.main([str(a) for a in args])
    err = capsys.readouterr().err
    return ei.value.code, json.loads(err.strip().splitlines()[-1])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestTrain:
    def test_mse_and_ri_reports(self, tmp_path, capsys):
        for kind in ("mse", "ri"):
            out = tmp_path / kind
            code, stdout, _ = run_cli(["train", "--config", write_config(tmp_path, kind),
                                       "--out", out], capsys)
            assert code == 0
            assert json.loads(stdout)["test_mse"] > 0
            rep = json.loads((out / "report.json").read_text())
            assert rep["loss_kind"] == kind and len(rep["history"]) == 2
            assert ("hsic_value" in rep["history"][0]) == (kind == "ri")
            assert rep["config_text"] == write_config(tmp_path, kind).read_text()
            assert (out / "model_seed3.ckpt").is_file()

    def test_reports_identical_except_meta_line(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "ri")
        texts = []
        for sub in ("a", "b"):
            run_cli(["train", "--config", cfg, "--out", tmp_path / sub], capsys)
            texts.append((tmp_path / sub / "report.json").read_text().splitlines())
        a, b = texts
        assert '"meta"' in a[1] and "generated_at" in a[1]
        assert a[:1] + a[2:] == b[:1] + b[2:]
        assert (tmp_path / "a" / "model_seed3.ckpt").read_bytes() == \
            (tmp_path / "b" / "model_seed3.ckpt").read_bytes()

    def test_seed_override_and_runs(self, tmp_path, capsys):
        out = tmp_path / "o"
        run_cli(["train", "--config", write_config(tmp_path), "--seed", 10, "--runs", 2,
                 "--out", out], capsys)
        rep = json.loads((out / "report.json").read_text())
        assert rep["seeds"] == [10, 11] and "test_mse_std" in rep
        assert (out / "report_seed11.json").is_file()

    def test_dataset_gate(self, tmp_path, capsys):
        f = synthetic_seasonal(300, 2, seed=0)
        csv_path = tmp_path / "ETTh1.csv"
        write_csv(f, csv_path)
        cfg = tmp_path / "real.ini"
        cfg.write_text(SMALL.format(kind="mse").replace("synthetic = seasonal",
                                                         "path = ETTh1.csv"))
        code, err = fail_cli(["train", "--config", cfg, "--out", tmp_path / "x"], capsys)
        assert code == 2 and err["key"] == "data.path"
        code, _, _ = run_cli(["train", "--config", cfg, "--out", tmp_path / "x",
                              "--acknowledge-datasets"], capsys)
        assert code == 0
        rep = json.loads((tmp_path / "x" / "report.json").read_text())
        assert rep["dataset"]["columns"] == ["x0", "x1"]


class TestErrors:
    def test_missing_config(self, tmp_path, capsys):
        code, err = fail_cli(["train", "--config", tmp_path / "none.ini"], capsys)
        assert code == 2 and err["key"] == "config"

    @pytest.mark.parametrize("edit,key", [
        (("kind = mse", "kind = huber"), "loss.kind"),
        (("w = 24", "w = 0"), "data.w"),
        (("kernel_size = 5", "kernel_size = 4"), "train.kernel_size"),
        (("epochs = 2", "epochs = two"), "train.epochs"),
        (("synthetic = seasonal", "synthetic = walk"), "data.synthetic"),
    ])
    def test_bad_key_named(self, tmp_path, capsys, edit, key):
        p = tmp_path / "bad.ini"
        p.write_text(SMALL.format(kind="mse").replace(*edit))
        code, err = fail_cli(["train", "--config", p], capsys)
        assert code == 2 and err["key"] == key

    def test_missing_dataset_file(self, tmp_path, capsys):
        p = tmp_path / "m.ini"
        p.write_text(SMALL.format(kind="mse").replace("synthetic = seasonal", "path = nope.csv"))
        code, err = fail_cli(["train", "--config", p, "--acknowledge-datasets"], capsys)
        assert code == 1 and err["error"] == "MissingFileError"

    def test_usage_error(self, capsys):
        code, err = fail_cli(["tradeoff", "--tau", "a,b"], capsys)
        assert code == 2 and err["key"] == "args"

    def test_subprocess_exit_code(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "riloss.cli", "crossterm", "--trials", "5"],
                              capture_output=True, text=True, cwd=tmp_path)
        assert proc.returncode == 1
        assert json.loads(proc.stderr)["error"] == "ValueError"


def test_ablation(tmp_path, capsys):
    out = tmp_path / "abl"
    code, _, _ = run_cli(["ablation", "--config", write_config(tmp_path), "--out", out], capsys)
    assert code == 0
    rows = read_csv(out / "ablation.csv")
    assert rows[0] == ["loss_kind", "H", "test_mse", "test_mae"]
    assert sorted(r[0] for r in rows[1:]) == ["mae", "mse", "pearson_mse", "ri"]
    assert all(np.isfinite(float(r[2])) for r in rows[1:])


def test_robustness(tmp_path, capsys):
    out = tmp_path / "rob"
    cfg = write_config(tmp_path).read_text().replace("epochs = 2", "epochs = 1")
    p = tmp_path / "rob.ini"
    p.write_text(cfg)
    run_cli(["robustness", "--config", p, "--snr=-3,0,3,10", "--out", out], capsys)
    rows = read_csv(out / "robustness.csv")[1:]
    assert len(rows) == 8
    assert [r[1] for r in rows[:2]] == ["mse", "ri"]


def test_robustness_needs_snr(tmp_path, capsys):
    code, err = fail_cli(["robustness", "--config", write_config(tmp_path)], capsys)
    assert code == 2 and err["key"] == "robustness.snr"


def test_sweep(tmp_path, capsys):
    out = tmp_path / "sw"
    run_cli(["sweep", "--config", write_config(tmp_path), "--seeds", "1,2", "--out", out], capsys)
    rows = read_csv(out / "sweep.csv")
    assert [r[0] for r in rows[1:]] == ["1", "2", "mean", "std"]


def test_friedman(tmp_path, capsys):
    t = tmp_path / "table.csv"
    t.write_text("setting,a,b,c\ns1,1,2,3\ns2,1,3,2\ns3,2,1,3\ns4,1,2,3\n")
    out = tmp_path / "fr"
    code, stdout, _ = run_cli(["friedman", "--table", t, "--q", "2.343", "--out", out], capsys)
    rep = json.loads((out / "friedman.json").read_text())
    assert rep["tau_chi2"] == pytest.approx(4.5) and rep["methods"] == ["a", "b", "c"]
    assert json.loads(stdout)["tau_F"] == pytest.approx(13.5 / 3.5)
    run_cli(["friedman", "--table", t, "--higher-is-better", "--out", out], capsys)
    flipped = json.loads((out / "friedman.json").read_text())
    assert flipped["avg_ranks"] == [4 - r for r in rep["avg_ranks"]]


def test_tradeoff(tmp_path, capsys):
    out = tmp_path / "tr"
    code, stdout, _ = run_cli(["tradeoff", "--points", 200, "--out", out], capsys)
    rows = read_csv(out / "tradeoff.csv")
    assert rows[0] == ["tau", "rho", "mse", "hsic", "ri"]
    assert len(rows) == 1 + 2 * 51
    assert {r[0] for r in rows[1:]} == {"50.0", "100.0"}
    assert "RI minimum at rho=" in stdout


def test_crossterm_identity(tmp_path, capsys):
    out = tmp_path / "ct"
    _, stdout, _ = run_cli(["crossterm", "--P", "identity", "--trials", 10000, "--out", out],
                           capsys)
    assert "analytic=0 " in stdout
    row = read_csv(out / "crossterm.csv")[1]
    assert float(row[4]) == 0.0


def test_crossterm_from_file(tmp_path, capsys):
    P = tmp_path / "p.csv"
    np.savetxt(P, np.zeros((3, 3)), delimiter=",")
    out = tmp_path / "ct"
    run_cli(["crossterm", "--P", P, "--trials", 10000, "--sigma", 2, "--out", out], capsys)
    assert float(read_csv(out / "crossterm.csv")[1][4]) == pytest.approx(4.0)


def test_projection_matrix():
    P = harness.named_matrix("projection", 8, seed=1)
    np.testing.assert_allclose(P @ P, P, atol=1e-12)
    np.testing.assert_allclose(P, P.T, atol=1e-15)


def test_bounds(tmp_path, capsys):
    out = tmp_path / "bd"
    run_cli(["bounds", "--n", "50,100,200,400", "--replicates", 20, "--mc-draws", 100,
             "--out", out], capsys)
    rows = read_csv(out / "convergence.csv")
    assert rows[0] == ["n", "mean_abs_dev", "se", "bound_total", "reference"]
    assert [r[0] for r in rows[1:]] == ["50", "100", "200", "400"]
    rep = json.loads((out / "bound_report.json").read_text())
    assert rep["n"] == 400 and np.isfinite(rep["total"]) and rep["residual_kernel"]["c0"] == 1.0


def test_config_parsing_sections():
    with pytest.raises(harness.ConfigError) as ei:
        harness.parse_config("[data]\nsynthetic = seasonal\n[extra]\nx = 1\n")
    assert ei.value.key == "extra"
    with pytest.raises(harness.ConfigError):
        harness.parse_config("[data]\nsynthetic = seasonal\npath = a.csv\n")
    cfg = harness.parse_config("[data]\nsynthetic = seasonal\n[ablation]\nhorizons = 12, 24\n")
    assert cfg.horizons == (12, 24) and cfg.H == 96 and cfg.loss.lam == 10.0


def test_noise_only_on_inputs():
    cfg = harness.parse_config(SMALL.format(kind="mse"))
    prep = harness.prepare(cfg)
    clean = harness.prepare(harness.parse_config(SMALL.format(kind="mse").replace(
        "snr_db = 0\n", "")))
    np.testing.assert_array_equal(prep.test.Y, clean.test.Y)
    assert not np.array_equal(prep.test.X, clean.test.X)
