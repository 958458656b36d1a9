"""Report figures. Everything renders off-screen to PNG files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .metrics import MetricsReport  # noqa: E402

STYLE = {
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "svg.hashsalt": "scadafs",
}

COLORS = ("#1f5f8b", "#c8553d", "#588b8b", "#f28f3b")


def _save(fig, path):
    # no Software/date metadata, so identical inputs give identical bytes
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def _metric(v):
    return np.nan if v is None else float(v)


def plot_rankings(rankings, path, top=15):
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(rankings), figsize=(4.2 * len(rankings), 0.28 * top + 1.2), squeeze=False)
        for ax, r, color in zip(axes[0], rankings, COLORS):
            ids = r.order[:top]
            scores = np.array([r.score_of(f) for f in ids])
            finite = scores[np.isfinite(scores)]
            cap = finite.max() * 1.1 if finite.size and finite.max() > 0 else 1.0
            shown = np.where(np.isfinite(scores), scores, cap)
            y = np.arange(len(ids))[::-1]
            ax.barh(y, shown, color=color)
            for yi, s in zip(y, scores):
                if not np.isfinite(s):
                    ax.text(cap, yi, " inf", va="center", fontsize=7)
            ax.set_yticks(y)
            ax.set_yticklabels(ids, fontsize=6)
            ax.set_title(r.method)
            ax.set_xlabel("score")
        fig.tight_layout()
        _save(fig, path)


def plot_trace(steps, path):
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 4), sharex=True)
        x = [s.step for s in steps]
        ax1.plot(x, [s.criterion for s in steps], marker="o", ms=3, color=COLORS[0])
        inc = [s for s in steps if s.action == "conditional_include"]
        ax1.plot([s.step for s in inc], [s.criterion for s in inc], "^", color=COLORS[1], label="re-inclusion")
        ax1.set_ylabel("criterion (F-score)")
        if inc:
            ax1.legend()
        ax2.step(x, [len(s.subset) for s in steps], where="post", color=COLORS[2])
        ax2.set_ylabel("subset size")
        ax2.set_xlabel("search step")
        fig.tight_layout()
        _save(fig, path)


def plot_metrics(report: MetricsReport, path, title=""):
    names = ("accuracy", "specificity", "recall", "precision", "f_score")
    vals = [_metric(getattr(report, n)) for n in names]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.bar(names, vals, color=COLORS[0])
        for i, v in enumerate(vals):
            ax.text(i, 0.02 if np.isnan(v) else v + 0.01, "n/a" if np.isnan(v) else f"{v:.2f}", ha="center", fontsize=7)
        ax.set_ylim(0, 1.1)
        ax.set_title(f"{title} false alarms: {report.false_alarm_minutes} min".strip())
        fig.tight_layout()
        _save(fig, path)


def plot_comparison(reports: dict[str, MetricsReport], path):
    names = ("recall", "precision", "f_score")
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7, 3), gridspec_kw={"width_ratios": [3, 1]})
        width = 0.8 / len(reports)
        x = np.arange(len(names))
        for i, (label, rep) in enumerate(reports.items()):
            ax1.bar(x + i * width, [_metric(getattr(rep, n)) for n in names], width, label=label, color=COLORS[i])
        ax1.set_xticks(x + width * (len(reports) - 1) / 2)
        ax1.set_xticklabels(names)
        ax1.set_ylim(0, 1.1)
        ax1.legend()
        ax2.bar(list(reports), [r.false_alarm_minutes for r in reports.values()], color=COLORS[: len(reports)])
        ax2.set_ylabel("false alarm duration [min]")
        fig.tight_layout()
        _save(fig, path)
