import hashlib
import json

import numpy as np
import pytest

from cstune.cli import main
from cstune.data import read_embx
from cstune.evaluation import read_sweep_csv


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    code = run_cli(
        "synth", "--out", str(out), "--classes", "4", "--dim", "16",
        "--train-rows", "300", "--test-rows", "100", "--nuisance-dim", "4",
        "--nuisance-scale", "1.0", "--seed", "3",
    )
    assert code == 0
    return out


def test_synth_writes_readable_embx(synth_dir):
    train = read_embx(synth_dir / "train.embx")
    test = read_embx(synth_dir / "test.embx")
    assert train.num_classes == 4 and train.embed_dim == 16
    assert len(train) == 300 and len(test) == 100
    report = json.loads((synth_dir / "generation-report.json").read_text())
    assert "linear_probe_error" in report


def test_synth_is_seed_deterministic(tmp_path, synth_dir):
    out2 = tmp_path / "again"
    code = run_cli(
        "synth", "--out", str(out2), "--classes", "4", "--dim", "16",
        "--train-rows", "300", "--test-rows", "100", "--nuisance-dim", "4",
        "--nuisance-scale", "1.0", "--seed", "3",
    )
    assert code == 0
    for name in ("train.embx", "test.embx"):
        a = hashlib.sha256((synth_dir / name).read_bytes()).hexdigest()
        b = hashlib.sha256((out2 / name).read_bytes()).hexdigest()
        assert a == b


def test_inspect_prints_header(synth_dir, capsys):
    assert run_cli("inspect", "--file", str(synth_dir / "train.embx")) == 0
    out = capsys.readouterr().out
    assert "embed_dim: 16" in out
    assert "num_classes: 4" in out
    assert "rows: 300" in out


def test_inspect_corrupt_file_fails_with_error_class(synth_dir, tmp_path, capsys):
    blob = bytearray((synth_dir / "train.embx").read_bytes())
    blob[len(blob) // 2] ^= 0xFF
    bad = tmp_path / "bad.embx"
    bad.write_bytes(bytes(blob))
    assert run_cli("inspect", "--file", str(bad)) == 1
    err = capsys.readouterr().err
    assert err.startswith("format-error:")


@pytest.fixture(scope="module")
def train_run(synth_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = run_cli(
        "train", "--train", str(synth_dir / "train.embx"),
        "--test", str(synth_dir / "test.embx"),
        "--budget", "8", "--method", "semi", "--steps", "26",
        "--seed", "1", "--out", str(out),
    )
    assert code == 0
    return out


def test_train_smoke_produces_artifacts(train_run):
    report = json.loads((train_run / "report.json").read_text())
    assert report["steps_run"] == 26
    assert 0.0 <= report["best_error"] <= 1.0
    assert (train_run / "checkpoint.sfck").exists()
    assert (train_run / "config.ini").exists()
    meta = json.loads((train_run / "run.json").read_text())
    assert meta["seed"] == 1 and "version" in meta
    timing = json.loads((train_run / "timing.json").read_text())
    assert timing["wall_clock_s"] > 0


def test_train_is_deterministic(synth_dir, train_run, tmp_path):
    out2 = tmp_path / "run2"
    code = run_cli(
        "train", "--train", str(synth_dir / "train.embx"),
        "--test", str(synth_dir / "test.embx"),
        "--budget", "8", "--method", "semi", "--steps", "26",
        "--seed", "1", "--out", str(out2),
    )
    assert code == 0
    assert (out2 / "report.json").read_bytes() == (train_run / "report.json").read_bytes()


def test_train_oversized_budget_names_both_numbers(synth_dir, tmp_path, capsys):
    code = run_cli(
        "train", "--train", str(synth_dir / "train.embx"),
        "--test", str(synth_dir / "test.embx"),
        "--budget", "301", "--steps", "5", "--out", str(tmp_path / "x"),
    )
    assert code == 1
    err = capsys.readouterr().err
    assert "301" in err and "300" in err


def test_train_sup_method(synth_dir, tmp_path):
    out = tmp_path / "sup"
    code = run_cli(
        "train", "--train", str(synth_dir / "train.embx"),
        "--test", str(synth_dir / "test.embx"),
        "--budget", "8", "--method", "sup", "--steps", "24", "--out", str(out),
    )
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert all(s["phase"] == "supervised" for s in report["steps"])


def test_sweep_csv_rows_and_determinism(synth_dir, tmp_path):
    out = tmp_path / "sweep"
    args = (
        "sweep", "--train", str(synth_dir / "train.embx"),
        "--test", str(synth_dir / "test.embx"),
        "--seeds", "2", "--budgets", "8,16", "--steps", "12", "--out", str(out),
    )
    assert run_cli(*args) == 0
    rows = read_sweep_csv(out / "sweep.csv")
    assert len(rows) == 2 * 2 * 2
    first = (out / "sweep.csv").read_bytes()
    assert run_cli(*args) == 0
    assert (out / "sweep.csv").read_bytes() == first


def test_sweep_default_ladder(synth_dir, tmp_path, capsys):
    # 300-row train set with K=4: ladder is 300, 60, 12, 4
    out = tmp_path / "sweep-ladder"
    code = run_cli(
        "sweep", "--train", str(synth_dir / "train.embx"),
        "--test", str(synth_dir / "test.embx"),
        "--seeds", "1", "--steps", "2", "--out", str(out),
    )
    assert code == 0
    rows = read_sweep_csv(out / "sweep.csv")
    assert sorted({r.budget for r in rows}, reverse=True) == [300, 60, 12, 4]
    meta = json.loads((out / "run.json").read_text())
    assert meta["ladder"] == [300, 60, 12, 4]


def test_export_features_from_checkpoint(train_run, synth_dir, tmp_path):
    out_csv = tmp_path / "features.csv"
    code = run_cli(
        "export-features", "--checkpoint", str(train_run / "checkpoint.sfck"),
        "--data", str(synth_dir / "test.embx"), "--out", str(out_csv),
    )
    assert code == 0
    header = out_csv.read_text().splitlines()[0].split(",")
    assert len(header) == 1 + 1024 + 5
    assert sum(1 for _ in open(out_csv)) == 101  # header + rows


def test_missing_out_and_no_env_is_parameter_error(synth_dir, capsys, monkeypatch):
    monkeypatch.delenv("CSTUNE_OUT_ROOT", raising=False)
    code = run_cli(
        "train", "--train", str(synth_dir / "train.embx"),
        "--test", str(synth_dir / "test.embx"), "--budget", "8",
    )
    assert code == 1
    assert capsys.readouterr().err.startswith("parameter-error:")


def test_out_root_env_is_default_root(synth_dir, tmp_path, monkeypatch):
    monkeypatch.setenv("CSTUNE_OUT_ROOT", str(tmp_path / "root"))
    code = run_cli(
        "train", "--train", str(synth_dir / "train.embx"),
        "--test", str(synth_dir / "test.embx"),
        "--budget", "8", "--steps", "4",
    )
    assert code == 0
    assert (tmp_path / "root" / "train" / "report.json").exists()


def test_config_file_round_trip(synth_dir, tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[schedule]\ntotal_steps = 9\neval_every = 3\n[optimizer]\nlr = 0.001\n")
    out = tmp_path / "cfgrun"
    code = run_cli(
        "train", "--train", str(synth_dir / "train.embx"),
        "--test", str(synth_dir / "test.embx"),
        "--budget", "8", "--config", str(cfg), "--out", str(out),
    )
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["steps_run"] == 9
    snapshot = (out / "config.ini").read_text()
    assert "total_steps = 9" in snapshot
    assert "lr = 0.001" in snapshot
    assert "insert_disc_activations = true" in snapshot


def test_config_rejects_unimplemented_fixed_key(synth_dir, tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[losses]\nnonsaturating_generator = false\n")
    code = run_cli(
        "train", "--train", str(synth_dir / "train.embx"),
        "--test", str(synth_dir / "test.embx"),
        "--budget", "8", "--config", str(cfg), "--out", str(tmp_path / "y"),
    )
    assert code == 1
    assert "nonsaturating_generator" in capsys.readouterr().err
