import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from seqrules.errors import FormatError
from seqrules.logic import Rule
from seqrules.report import (
    REPORT_KEYS,
    _float,
    emit_report,
    read_report,
    read_table,
    report_to_text,
    write_losses_table,
    write_rules_table,
)
from seqrules.train import Report


def sample_report():
    rule = Rule(1, ((0, 1), (2, 3)), tau=0.3, precision=1.0, recall=0.5).to_dict()
    rule.update(test_precision=0.75, test_recall=None)
    losses = [{"target": 1, "phase": "joint", "epoch": 0, "recon": 0.5, "total": 1.25}]
    return Report(1.0, 0.9642857142857143, [rule], 3.5, losses, dataset="toy", config_hash="ab")


def test_round_trip(tmp_path):
    rep = sample_report()
    back = read_report(emit_report(rep, tmp_path / "r.json"))
    assert back.to_dict() == rep.to_dict()


def test_key_order_and_decimals():
    text = report_to_text(sample_report())
    assert list(json.loads(text)) == list(REPORT_KEYS)
    assert '"accuracy_neural": 1.0000' in text
    assert '"accuracy_rules": 0.9642857142857143' in text


@given(st.floats(allow_nan=False, allow_infinity=False, min_value=-1e6, max_value=1e6))
def test_float_keeps_value_and_four_decimals(x):
    text = _float(x)
    assert float(text) == x
    if "e" not in text:
        assert len(text.split(".")[1]) >= 4


def test_nonfinite_is_null():
    assert _float(math.nan) == "null" and _float(math.inf) == "null"


def test_mismatched_rule_text_rejected(tmp_path):
    p = emit_report(sample_report(), tmp_path / "r.json")
    d = json.loads(p.read_text())
    d["rules"][0]["head"] = 0
    p.write_text(json.dumps(d))
    with pytest.raises(FormatError, match="disagree"):
        read_report(p)
    p.write_text("{")
    with pytest.raises(FormatError):
        read_report(p)


def test_tables(tmp_path):
    rep = sample_report()
    rows = read_table(write_rules_table(rep, tmp_path / "rules.tsv"))
    assert rows[0]["body"] == "0:1 2:3" and rows[0]["test_recall"] == ""
    assert rows[0]["text"].startswith("class_1 :- ")
    losses = read_table(write_losses_table(rep.losses, tmp_path / "l.tsv"))
    assert list(losses[0]) == ["target", "phase", "epoch", "recon", "total"]


def test_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError):
        emit_report(sample_report(), blocker / "r.json")
