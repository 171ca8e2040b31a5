"""``seqrules`` command line: train, evaluate, extract, baseline, sweep and plot."""

from __future__ import annotations

import argparse
import copy
import logging
import sys
from pathlib import Path

import numpy as np

from . import report as rpt
from .config import RunConfig, config_hash, load_dataset, parse_config, write_resolved
from .data import gen_synthetic, write_ucr
from .errors import ConfigError, InvalidArgument, SeqRulesError
from .logic import Rule, format_rule
from .plotting import plot_losses, plot_sweep, render_highlights
from .train import (
    default_targets,
    evaluate,
    extract_ruleset,
    fit,
    load_model,
    save_model,
    target_labels,
)

EXIT_CODES = {"config": 2, "data": 3, "training": 4, "io": 5}
SWEEP_AXES = {"clusters": "clusters", "regions": "regions", "window_length": "window", "window": "window"}


# -- config plumbing ---------------------------------------------------------------


def resolve(args) -> RunConfig:
    """Config file (or defaults) with command-line overrides folded in and validated."""
    cfg = parse_config(args.config) if args.config else RunConfig().validate()
    if args.seed is not None:
        cfg.train.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    if args.no_pretrain:
        cfg.train.pretrain = False
    if args.target_class is not None:
        cfg.target = args.target_class
    if args.tau:
        cfg.train.taus = sorted(args.tau)
    return cfg.validate()


def _model_dir(cfg) -> Path:
    return Path(cfg.out) / "models"


def _load_models(cfg, ds):
    found = []
    for t in default_targets(ds, cfg.target):
        path = _model_dir(cfg) / f"target_{t}.bin"
        if not path.exists():
            raise ConfigError(f"no trained model at {path}; run `seqrules train` first")
        found.append(load_model(path))
    return found


def _write_outputs(cfg, ds, models, rep, out: Path, figures: bool = True):
    rep.config_hash = config_hash(cfg)
    rpt.emit_report(rep, out / "report.json")
    rpt.write_rules_table(rep, out / "rules.tsv")
    rpt.write_losses_table(rep.losses, out / "losses.tsv")
    if figures:
        plot_losses(rep.losses, out / "losses.svg")
        _top_highlight(ds, models, rep, out / "highlight_top_rule.svg")
    print(f"{ds.name}: accuracy network={rep.accuracy_neural:.4f} rules={rep.accuracy_rules:.4f} "
          f"({len(rep.rules)} rules, {rep.seconds:.1f}s) -> {out}")


def _top_highlight(ds, models, rep, path):
    """Highlight the best rule on the first test input of its head class."""
    if not rep.rules:
        return None
    best = min(rep.rules, key=lambda r: (-r["precision"], -r["recall"], len(r["body"])))
    rule = Rule.from_dict(best)
    model = next(m for m in models if m.target == rule.head)
    idx = np.flatnonzero(ds.y_test == rule.head)
    if idx.size == 0:
        return None
    return render_highlights(ds.X_test[idx[0]], rule, model, path, ds.image_shape,
                             title=f"{ds.name} test input {idx[0]}")


# -- commands ------------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    ds = gen_synthetic(args.kind, args.n_per_class, args.noise_std, seed=args.seed or 0)
    out = Path(args.out or f"data/synthetic/{ds.name}")
    write_ucr(ds, out)
    print(f"wrote {ds.name} ({len(ds.X_train)} train / {len(ds.X_test)} test) to {out}")
    return 0


def cmd_train(args, hard: bool = False) -> int:
    cfg = resolve(args)
    out = Path(cfg.out) / ("baseline" if hard else "")
    write_resolved(cfg, out)
    ds = load_dataset(cfg.dataset)
    models = fit(ds, cfg.train, cfg.target, hard=hard)
    if not hard:
        for m in models:
            _model_dir(cfg).mkdir(parents=True, exist_ok=True)
            save_model(m, _model_dir(cfg) / f"target_{m.target}.bin")
    rep = evaluate(models, ds)
    _write_outputs(cfg, ds, models, rep, out)
    return 0


def cmd_eval(args) -> int:
    cfg = resolve(args)
    ds = load_dataset(cfg.dataset)
    models = _load_models(cfg, ds)
    rep = evaluate(models, ds, cfg.train.taus, cfg.train.min_precision)
    out = Path(cfg.out) / "eval"
    write_resolved(cfg, out)
    _write_outputs(cfg, ds, models, rep, out)
    return 0


def cmd_extract(args) -> int:
    cfg = resolve(args)
    ds = load_dataset(cfg.dataset)
    rows = []
    for m in _load_models(cfg, ds):
        y_tr, _ = target_labels(ds.y_train, m.target, ds.num_classes)
        for rule in extract_ruleset(m, ds.X_train, y_tr, cfg.train.taus, cfg.train.min_precision):
            print(format_rule(rule))
            rows.append(rule.to_dict())
    out = Path(cfg.out) / "extract"
    write_resolved(cfg, out)
    rpt.write_table(rows, rpt.RULE_COLUMNS[:6], out / "rules.tsv")
    if not rows:
        print("no rule passed the precision filter", file=sys.stderr)
    return 0


def cmd_sweep(args) -> int:
    cfg = resolve(args)
    field_name = SWEEP_AXES.get(args.axis)
    if field_name is None:
        raise ConfigError(f"unknown sweep axis {args.axis!r}; choose from {sorted(SWEEP_AXES)}")
    try:
        values = [int(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"sweep values must be integers, got {args.values!r}") from None
    if not values:
        raise ConfigError("sweep needs at least one value")
    ds = load_dataset(cfg.dataset)
    out = Path(cfg.out) / f"sweep_{field_name}"
    write_resolved(cfg, out)
    rows = []
    for v in values:
        cell = copy.deepcopy(cfg)
        setattr(cell.train, field_name, v)
        row = {"axis": field_name, "value": v}
        try:
            cell.validate()
            cell.train.symbolizer.validate(ds.length)
            rep = evaluate(fit(ds, cell.train, cell.target), ds)
            row.update(status="ok", accuracy_neural=rep.accuracy_neural,
                       accuracy_rules=rep.accuracy_rules, n_rules=len(rep.rules), seconds=rep.seconds)
        except SeqRulesError as exc:
            row.update(status=f"failed: {exc}")
        rows.append(row)
        print("\t".join(rpt.format_cell(row.get(c)) for c in ("value", "status", "accuracy_neural", "accuracy_rules")))
    cols = ["axis", "value", "status", "accuracy_neural", "accuracy_rules", "n_rules", "seconds"]
    rpt.write_table(rows, cols, out / "sweep.tsv")
    plot_sweep(rows, field_name, out / "sweep.svg")
    return 0


def cmd_plot(args) -> int:
    cfg = resolve(args)
    ds = load_dataset(cfg.dataset)
    models = _load_models(cfg, ds)
    out = Path(cfg.out) / "highlights"
    written = 0
    for m in models:
        y_tr, _ = target_labels(ds.y_train, m.target, ds.num_classes)
        rules = extract_ruleset(m, ds.X_train, y_tr, cfg.train.taus, cfg.train.min_precision)
        picks = range(len(rules)) if args.rule is None else [args.rule]
        if args.rule is not None and not 0 <= args.rule < len(rules):
            raise InvalidArgument(f"rule index {args.rule} outside the {len(rules)} kept rules")
        X, y = (ds.X_test, ds.y_test) if args.split == "test" else (ds.X_train, ds.y_train)
        idx = np.flatnonzero(y == m.target)[: args.count]
        for k in picks:
            rule = rules[k]
            for i in idx:
                path = out / f"target{m.target}_rule{k}_{args.split}{i}.svg"
                plot = render_highlights(X[i], rule, m, path, ds.image_shape,
                                         title=f"{ds.name} {args.split} input {i}")
                print(f"{path}\t{len(plot.spans)} spans")
                written += 1
    if not written:
        print("nothing to plot: no rules or no inputs of the target class", file=sys.stderr)
    return 0


# -- entry point ----------------------------------------------------------------------


def _common(p):
    p.add_argument("--config", help="YAML run config (defaults when omitted)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--no-pretrain", action="store_true", help="skip autoencoder pretraining")
    p.add_argument("--target-class", type=int, help="learn rules for this class only")
    p.add_argument("--tau", type=float, action="append",
                   help="extraction threshold; repeat for a sweep")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seqrules", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic dataset as UCR-style TSV")
    p.add_argument("--kind", choices=["triangular", "trigonometric"], default="triangular")
    p.add_argument("--n-per-class", type=int, default=2)
    p.add_argument("--noise-std", type=float, default=0.1 ** 0.5)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_data)

    for name, func, text in (
        ("train", cmd_train, "train, save models and write a report"),
        ("eval", cmd_eval, "re-evaluate saved models"),
        ("extract", cmd_extract, "print rules extracted from saved models"),
        ("baseline", lambda a: cmd_train(a, hard=True), "hard k-means baseline"),
    ):
        p = sub.add_parser(name, help=text)
        _common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", help="train once per hyperparameter value")
    _common(p)
    p.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    p.add_argument("--values", required=True, help="comma-separated integers")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="highlight rule windows on inputs of the target class")
    _common(p)
    p.add_argument("--rule", type=int, help="rule index (default: every kept rule)")
    p.add_argument("--split", choices=["train", "test"], default="test")
    p.add_argument("--count", type=int, default=1, help="inputs per rule")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SeqRulesError as exc:
        print(f"error [{exc.category}]: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return EXIT_CODES["io"]


if __name__ == "__main__":
    sys.exit(main())
