"""Static figures: rule highlights on sequences or images, sweeps and loss curves."""

from __future__ import annotations

import textwrap
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib as mpl
import numpy as np
from matplotlib.figure import Figure
from matplotlib.patches import Patch, Rectangle

from .errors import InvalidArgument
from .logic import Rule, format_rule
from .symbolize import assign_region, slide_windows, sq_dists, soft_assign

STYLE = {
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "grid.linewidth": 0.5,
    "lines.linewidth": 1.4,
    "legend.frameon": False,
    "savefig.bbox": "tight",
    "svg.fonttype": "none",
}
PAIR_COLORS = ("tab:red", "tab:green", "tab:blue", "tab:orange", "tab:purple",
               "tab:brown", "tab:pink", "tab:olive", "tab:cyan")


@dataclass
class Span:
    pair: int  # index of the body pair this span belongs to
    pattern: int
    region: int
    start: int  # window covers points start .. stop-1
    stop: int
    color: str


@dataclass
class HighlightPlot:
    values: np.ndarray
    spans: list = field(default_factory=list)
    caption: str = ""
    image_shape: tuple | None = None

    def pairs_with_spans(self) -> set:
        return {s.pair for s in self.spans}


def pair_color(i: int) -> str:
    return PAIR_COLORS[i % len(PAIR_COLORS)]


def highlight_spans(x, rule: Rule, model) -> list:
    """Windows to shade for each body pair of ``rule`` on sequence ``x``.

    A pair (pattern i, region j) only gets spans when region j's
    discretized cluster is i, i.e. exactly when the pair holds. The spans
    are the windows of region j whose nearest center is i; if the region's
    majority came from soft mass alone, the window with the largest
    membership in i stands in.
    """
    cfg = model.config
    K, R, l = cfg.clusters, cfg.regions, cfg.window
    for p, r in rule.body:
        if not (0 <= p < K and 0 <= r < R):
            raise InvalidArgument(f"rule pair pattern_{p}/region_{r} outside K={K}, R={R}")
    x = np.asarray(x, dtype=np.float64).ravel()
    T = x.size
    Z = model.encoder(slide_windows(x, l))
    D = sq_dists(Z, model.centers)
    nearest = D.argmin(axis=1)
    G = soft_assign(Z, model.centers, cfg.alpha)
    region = assign_region(np.arange(len(Z)), T, R)
    winners = model.discretized(x[None, :])[0].reshape(R, K).argmax(axis=1)
    spans = []
    for i, (p, r) in enumerate(rule.body):
        if winners[r] != p:
            continue
        in_region = np.flatnonzero(region == r)
        starts = in_region[nearest[in_region] == p]
        if starts.size == 0 and in_region.size:
            starts = in_region[[np.argmax(G[in_region, p])]]
        spans += [Span(i, p, r, int(s), int(s) + l, pair_color(i)) for s in starts]
    return spans


def merged_intervals(spans) -> list:
    """Union of overlapping spans per body pair as ``(pair, start, stop, color)``."""
    out = []
    for s in sorted(spans, key=lambda s: (s.pair, s.start)):
        if out and out[-1][0] == s.pair and s.start <= out[-1][2]:
            out[-1][2] = max(out[-1][2], s.stop)
        else:
            out.append([s.pair, s.start, s.stop, s.color])
    return [tuple(iv) for iv in out]


def _legend(ax, rule, below: bool):
    handles = [Patch(color=pair_color(i), alpha=0.6, label=f"pattern_{p}, region_{r}")
               for i, (p, r) in enumerate(rule.body)]
    if below:
        ax.legend(handles=handles, loc="upper center", bbox_to_anchor=(0.5, -0.02),
                  ncol=2, fontsize=7)
    else:
        ax.legend(handles=handles, loc="upper right", fontsize=8)


def render_highlights(x, rule: Rule, model, path=None, image_shape=None, title=None) -> HighlightPlot:
    """Shade the windows behind each body pair; write a vector image if ``path`` is set."""
    x = np.asarray(x, dtype=np.float64).ravel()
    spans = highlight_spans(x, rule, model)
    plot = HighlightPlot(x, spans, format_rule(rule), image_shape)
    if path is None:
        return plot
    with mpl.rc_context(STYLE):
        fig = Figure(figsize=(4.2, 4.2) if image_shape else (7, 3))
        ax = fig.add_subplot()
        if image_shape:
            h, w = image_shape
            ax.imshow(x.reshape(h, w), cmap="gray_r", interpolation="nearest")
            ax.grid(False)
            ax.set_axis_off()
            for _, start, stop, color in merged_intervals(spans):
                for pix in range(start, min(stop, x.size)):
                    row, col = divmod(pix, w)
                    ax.add_patch(Rectangle((col - 0.5, row - 0.5), 1, 1, color=color, alpha=0.6, lw=0))
        else:
            t = np.arange(x.size)
            ax.plot(t, x, color="0.25")
            for _, start, stop, color in merged_intervals(spans):
                ax.axvspan(start - 0.5, stop - 0.5, color=color, alpha=0.15, lw=0)
                ax.plot(t[start:stop], x[start:stop], color=color, lw=2.4)
            ax.set_xlabel("time point")
            ax.set_xlim(-0.5, x.size - 0.5)
        _legend(ax, rule, below=bool(image_shape))
        caption = textwrap.fill(plot.caption, 60 if image_shape else 100)
        ax.set_title((title + "\n" if title else "") + caption, fontsize=8)
        _save(fig, path)
    return plot


def plot_sweep(rows, axis: str, path) -> Path:
    """Accuracy of the network and of the rules against one hyperparameter."""
    rows = [r for r in rows if r.get("status", "ok") == "ok"]
    with mpl.rc_context(STYLE):
        fig = Figure(figsize=(5, 3.2))
        ax = fig.add_subplot()
        vals = [r["value"] for r in rows]
        ax.plot(vals, [r["accuracy_neural"] for r in rows], "o-", label="network")
        ax.plot(vals, [r["accuracy_rules"] for r in rows], "s--", label="rules")
        ax.set_xlabel(axis)
        ax.set_ylabel("test accuracy")
        ax.set_ylim(0, 1.02)
        ax.legend()
        return _save(fig, path)


def plot_losses(history, path) -> Path:
    """Per-epoch loss terms, one panel per training phase."""
    phases = list(dict.fromkeys(h["phase"] for h in history))
    with mpl.rc_context(STYLE):
        fig = Figure(figsize=(4 * max(len(phases), 1), 3))
        for i, phase in enumerate(phases):
            ax = fig.add_subplot(1, len(phases), i + 1)
            recs = [h for h in history if h["phase"] == phase]
            for target in sorted({h.get("target", 0) for h in recs}):
                sub = [h for h in recs if h.get("target", 0) == target]
                keys = [k for k in sub[0] if k not in ("phase", "epoch", "target")]
                for k in keys:
                    ax.plot([h["epoch"] for h in sub], [h[k] for h in sub], label=f"{k} (t={target})")
            ax.set_yscale("log")
            ax.set_xlabel("epoch")
            ax.set_title(phase)
            ax.legend(fontsize=7)
        return _save(fig, path)


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format=path.suffix.lstrip(".") or "svg")
    return path
