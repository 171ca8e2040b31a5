import json

import pytest

from seqrules.cli import EXIT_CODES, main
from seqrules.report import read_report, read_table

CONFIG = """\
dataset:
  kind: synthetic
  synthetic: triangular
train:
  window: 5
  regions: 4
  clusters: 3
  rule_lr: 0.01
  pretrain_epochs: 30
  joint_epochs: 60
"""


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "run.yaml"
    p.write_text(CONFIG + f"out: {tmp_path / 'out'}\n")
    return p


def run(*argv):
    return main([str(a) for a in argv])


def _report(path):
    d = json.loads(path.read_text())
    d.pop("seconds")
    d["rules"] = [dict(r) for r in d["rules"]]
    return d


def test_train_then_follow_up_commands(cfg, tmp_path, capsys):
    out = tmp_path / "out"
    assert run("train", "--config", cfg) == 0
    for name in ("report.json", "rules.tsv", "losses.tsv", "losses.svg", "config.resolved.yaml",
                 "models/target_1.bin"):
        assert (out / name).exists(), name
    rep = read_report(out / "report.json")
    assert 0 <= rep.accuracy_rules <= 1 and len(rep.config_hash) == 64

    assert run("eval", "--config", cfg) == 0
    assert read_report(out / "eval" / "report.json").accuracy_neural == rep.accuracy_neural

    capsys.readouterr()
    assert run("extract", "--config", cfg, "--tau", 0.3, "--tau", 0.1) == 0
    printed = [l for l in capsys.readouterr().out.splitlines() if l.startswith("class_")]
    assert len(printed) == len(read_table(out / "extract" / "rules.tsv"))

    assert run("plot", "--config", cfg, "--count", 2) == 0
    assert list((out / "highlights").glob("*.svg"))


def test_echoed_config_reproduces_run(cfg, tmp_path):
    assert run("train", "--config", cfg) == 0
    first = _report(tmp_path / "out" / "report.json")
    assert run("train", "--config", tmp_path / "out" / "config.resolved.yaml") == 0
    assert _report(tmp_path / "out" / "report.json") == first


def test_baseline_writes_report(cfg, tmp_path):
    assert run("baseline", "--config", cfg, "--seed", 3) == 0
    rep = read_report(tmp_path / "out" / "baseline" / "report.json")
    assert rep.kind == "hard"


def test_sweep_rows_and_failed_cells(cfg, tmp_path):
    assert run("sweep", "--config", cfg, "--axis", "window_length", "--values", "3,25") == 0
    rows = read_table(tmp_path / "out" / "sweep_window" / "sweep.tsv")
    assert [r["value"] for r in rows] == ["3", "25"]
    assert rows[0]["status"] == "ok" and rows[1]["status"].startswith("failed")


def test_single_value_sweep_equals_train(cfg, tmp_path):
    assert run("sweep", "--config", cfg, "--axis", "clusters", "--values", "3") == 0
    (row,) = read_table(tmp_path / "out" / "sweep_clusters" / "sweep.tsv")
    assert run("train", "--config", cfg) == 0
    rep = read_report(tmp_path / "out" / "report.json")
    assert float(row["accuracy_neural"]) == rep.accuracy_neural
    assert float(row["accuracy_rules"]) == rep.accuracy_rules


def test_gen_data_round_trips(tmp_path):
    target = tmp_path / "syn"
    assert run("gen-data", "--kind", "trigonometric", "--out", target) == 0
    cfg = tmp_path / "c.yaml"
    cfg.write_text(f"dataset:\n  kind: ucr\n  path: {target}\ntrain:\n  pretrain_epochs: 2\n"
                   f"  joint_epochs: 2\nout: {tmp_path / 'o'}\n")
    assert run("train", "--config", cfg) == 0


def test_exit_codes(tmp_path, cfg):
    bad = tmp_path / "bad.yaml"
    bad.write_text("train:\n  alpa: 1\n")
    assert run("train", "--config", bad) == EXIT_CODES["config"]
    assert run("eval", "--config", cfg) == EXIT_CODES["config"]  # nothing trained yet

    empty = tmp_path / "empty"
    empty.mkdir()
    ucr = tmp_path / "ucr.yaml"
    ucr.write_text(f"dataset:\n  kind: ucr\n  path: {empty}\n")
    assert run("train", "--config", ucr) == EXIT_CODES["data"]

    assert run("train", "--config", cfg) == 0
    model = tmp_path / "out" / "models" / "target_1.bin"
    model.write_bytes(model.read_bytes()[:100])
    assert run("eval", "--config", cfg) == EXIT_CODES["data"]

    assert run("sweep", "--config", cfg, "--axis", "clusters", "--values", "a") == EXIT_CODES["config"]
    assert len(set(EXIT_CODES.values())) == 4 and 0 not in EXIT_CODES.values()
