import numpy as np
import pytest

from seqrules.data import gen_synthetic
from seqrules.errors import InvalidArgument
from seqrules.logic import Rule, rule_satisfied
from seqrules.plotting import highlight_spans, merged_intervals, plot_losses, plot_sweep, render_highlights
from seqrules.train import TrainConfig, extract_ruleset, train_joint


@pytest.fixture(scope="module")
def setup():
    ds = gen_synthetic("triangular", n_per_class=2, seed=0)
    cfg = TrainConfig(window=5, regions=4, clusters=3, lr=1e-3, rule_lr=1e-2,
                      pretrain_epochs=100, joint_epochs=300)
    model = train_joint(ds.X_train, ds.y_train, cfg)
    return ds, model


def test_spans_agree_with_satisfaction(setup):
    ds, model = setup
    rng = np.random.default_rng(0)
    X = np.vstack([ds.X_train, ds.X_test])
    D = model.discretized(X)
    for _ in range(60):
        pairs = {(int(rng.integers(3)), int(rng.integers(4))) for _ in range(rng.integers(1, 4))}
        rule = Rule(1, tuple(pairs))
        for x, d in zip(X, D):
            spans = highlight_spans(x, rule, model)
            covered = {s.pair for s in spans} == set(range(len(rule.body)))
            assert covered == rule_satisfied(rule, d, 3)
            assert all(0 <= s.start < s.stop <= len(x) for s in spans)
            for s in spans:
                assert s.start // 5 == s.region


def test_region_one_pair_covers_points_five_to_nine(setup, tmp_path):
    ds, model = setup
    winner = int(model.discretized(ds.X_test[:1])[0].reshape(4, 3)[1].argmax())
    rule = Rule(1, ((winner, 1),), precision=1.0, recall=1.0)
    plot = render_highlights(ds.X_test[0], rule, model, tmp_path / "h.svg")
    starts = {s.start for s in plot.spans}
    assert starts and starts <= set(range(5, 10))
    assert (tmp_path / "h.svg").read_text().lstrip().startswith("<?xml")


def test_two_pairs_two_colors(setup, tmp_path):
    ds, model = setup
    w = model.discretized(ds.X_test[:1])[0].reshape(4, 3).argmax(axis=1)
    rule = Rule(1, ((int(w[0]), 0), (int(w[1]), 1)))
    plot = render_highlights(ds.X_test[0], rule, model, tmp_path / "two.svg")
    assert plot.pairs_with_spans() == {0, 1}
    assert len({s.color for s in plot.spans}) == 2


def test_no_matching_windows_still_captioned(setup, tmp_path):
    ds, model = setup
    w = model.discretized(ds.X_test[:1])[0].reshape(4, 3).argmax(axis=1)
    rule = Rule(1, (((int(w[2]) + 1) % 3, 2),), precision=0.9, recall=0.4)
    plot = render_highlights(ds.X_test[0], rule, model, tmp_path / "none.svg")
    assert plot.spans == []
    assert plot.caption.startswith("class_1 :- ") and "p=0.90" in plot.caption
    assert (tmp_path / "none.svg").exists()


def test_out_of_range_pair(setup):
    ds, model = setup
    for pair in ((0, 4), (3, 0)):
        with pytest.raises(InvalidArgument):
            highlight_spans(ds.X_test[0], Rule(1, (pair,)), model)


def test_learned_rules_render(setup, tmp_path):
    ds, model = setup
    rules = extract_ruleset(model, ds.X_train, ds.y_train)
    pos = ds.X_test[ds.y_test == 1][0]
    plot = render_highlights(pos, rules[0], model, tmp_path / "top.svg", title="top rule")
    assert plot.pairs_with_spans() == set(range(len(rules[0].body)))


def test_image_mode(setup, tmp_path):
    _, model = setup
    x = np.random.default_rng(0).uniform(size=20)
    rule = Rule(1, ((0, 0),))
    plot = render_highlights(x, rule, model, tmp_path / "img.svg", image_shape=(4, 5))
    assert plot.image_shape == (4, 5) and (tmp_path / "img.svg").exists()


def test_merged_intervals():
    from seqrules.plotting import Span
    spans = [Span(0, 1, 0, 0, 3, "r"), Span(0, 1, 0, 2, 5, "r"), Span(1, 2, 1, 2, 4, "g"),
             Span(0, 1, 0, 7, 9, "r")]
    assert merged_intervals(spans) == [(0, 0, 5, "r"), (0, 7, 9, "r"), (1, 2, 4, "g")]


def test_summary_figures(tmp_path):
    rows = [{"value": 2, "status": "ok", "accuracy_neural": 0.9, "accuracy_rules": 0.8},
            {"value": 3, "status": "failed: x"}]
    assert plot_sweep(rows, "clusters", tmp_path / "s.svg").exists()
    hist = [{"target": 1, "phase": p, "epoch": e, "recon": 1.0 / (e + 1)}
            for p in ("pretrain", "joint") for e in range(3)]
    assert plot_losses(hist, tmp_path / "l.png").read_bytes()[:4] == b"\x89PNG"
