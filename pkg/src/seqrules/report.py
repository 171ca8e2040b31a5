"""Report files: a JSON record per run and tab-separated tables."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .errors import FormatError
from .logic import parse_rule
from .train import Report

FLOAT_DECIMALS = 4
REPORT_KEYS = ("dataset", "kind", "config_hash", "accuracy_neural", "accuracy_rules",
               "seconds", "rules", "losses")
RULE_COLUMNS = ("text", "head", "body", "tau", "precision", "recall",
                "test_precision", "test_recall")


def _float(x: float) -> str:
    """Shortest exact repr, padded so at least four decimals show."""
    if not math.isfinite(x):
        return "null"
    text = repr(float(x))
    if "e" in text or "E" in text:
        return text
    decimals = len(text.split(".")[1]) if "." in text else 0
    return text if decimals >= FLOAT_DECIMALS else f"{x:.{FLOAT_DECIMALS}f}"


def _dump(obj, indent: int, level: int = 0) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, float):
        return _float(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_dump(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_dump(v, indent) for v in obj) + "]"
        items = [pad + _dump(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if hasattr(obj, "item"):  # numpy scalar
        return _dump(obj.item(), indent, level)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _ordered(d: dict, first) -> dict:
    out = {k: d[k] for k in first if k in d}
    out.update({k: d[k] for k in sorted(d) if k not in out})
    return out


def report_to_text(report: Report) -> str:
    d = report.to_dict()
    d["rules"] = [_ordered(r, RULE_COLUMNS) for r in d["rules"]]
    d["losses"] = [_ordered(h, ("target", "phase", "epoch")) for h in d["losses"]]
    return _dump(_ordered(d, REPORT_KEYS), indent=2) + "\n"


def emit_report(report: Report, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report_to_text(report))
    return path


def read_report(path) -> Report:
    """Parse a report file and check that every rule's text agrees with its fields."""
    try:
        d = json.loads(Path(path).read_text())
    except ValueError as exc:
        raise FormatError(f"{path}: not a report ({exc})") from None
    missing = [k for k in REPORT_KEYS if k not in d]
    if missing:
        raise FormatError(f"{path}: report lacks {', '.join(missing)}")
    for r in d["rules"]:
        parsed = parse_rule(r["text"])
        if parsed.head != r["head"] or [list(p) for p in parsed.body] != r["body"]:
            raise FormatError(f"{path}: rule text and fields disagree: {r['text']!r}")
    return Report.from_dict(d)


def format_cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if not math.isfinite(v) else _float(v)
    if isinstance(v, (list, tuple)):
        return " ".join(f"{a}:{b}" for a, b in v)
    return str(v)


def write_table(rows, columns, path) -> Path:
    """Tab-separated table with a header line; ``None`` becomes an empty cell."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([format_cell(row.get(c)) for c in columns])
    return path


def read_table(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


def write_rules_table(report: Report, path) -> Path:
    return write_table(report.rules, RULE_COLUMNS, path)


def write_losses_table(history, path) -> Path:
    cols = ["target", "phase", "epoch"]
    for h in history:
        cols += [k for k in h if k not in cols]
    return write_table(history, cols, path)
