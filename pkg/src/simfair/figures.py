"""Report figures rendered next to the delimited outputs.

Per-location absolute-error distributions per strategy, aggregated metric
bars, and the swap-vs-inverse approximation scatter.  All figures are
written as PNG with pinned metadata so reruns are byte-stable.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_SAVEFIG = dict(dpi=150, metadata={"Software": "simfair"})


def _style(ax):
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    ax.grid(axis="y", alpha=0.25, linewidth=0.6)
    ax.set_axisbelow(True)


def error_distribution_figure(per_location_rows: list[dict], split: str, path):
    """Box plot of per-location MAE per strategy for one split."""
    rows = [r for r in per_location_rows if r["split"] == split]
    strategies = sorted({r["strategy"] for r in rows})
    data = [[r["mae"] for r in rows if r["strategy"] == s] for s in strategies]
    fig, ax = plt.subplots(figsize=(1.2 + 0.9 * len(strategies), 3.2))
    ax.boxplot(data, tick_labels=strategies, showfliers=False)
    for i, vals in enumerate(data):
        if vals:
            x = np.linspace(i + 0.78, i + 1.22, len(vals))
            ax.plot(x, sorted(vals), ".", ms=2.5, alpha=0.45, color="tab:blue")
    ax.set_ylabel("per-location MAE (K)")
    ax.set_title(f"absolute error distribution: {split}", fontsize=10)
    ax.tick_params(axis="x", rotation=30, labelsize=8)
    _style(ax)
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG)
    plt.close(fig)


def metrics_bar_figure(table_rows: list[dict], metric: str, path):
    """Aggregated mean +- std of one metric per (split, strategy)."""
    splits = sorted({r["split"] for r in table_rows})
    strategies = sorted({r["strategy"] for r in table_rows})
    width = 0.8 / max(1, len(splits))
    fig, ax = plt.subplots(figsize=(1.5 + 1.0 * len(strategies), 3.2))
    xs = np.arange(len(strategies))
    for j, sp in enumerate(splits):
        means, stds = [], []
        for s in strategies:
            match = [r for r in table_rows if r["split"] == sp and r["strategy"] == s]
            means.append(match[0][f"{metric}_mean"] if match else np.nan)
            stds.append(match[0][f"{metric}_std"] if match else 0.0)
        ax.bar(xs + j * width, means, width=width, yerr=stds, capsize=2, label=sp)
    ax.set_xticks(xs + 0.4 - width / 2)
    ax.set_xticklabels(strategies, rotation=30, fontsize=8)
    ax.set_ylabel(metric)
    ax.legend(fontsize=7)
    _style(ax)
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG)
    plt.close(fig)


def swap_study_figure(report: dict, path):
    """Truth-vs-prediction scatter for the swapped-pair and inverted-chain arms."""
    run = report["runs"][0]
    truth = np.asarray(run["pairs"]["truth"])
    fig, axes = plt.subplots(1, 2, figsize=(7.0, 3.4), sharex=True, sharey=True)
    for ax, key, label, med in (
            (axes[0], "swap_pred", "data swap", report["median_swap_rmse"]),
            (axes[1], "inverse_pred", "inverted chain", report["median_inverse_rmse"])):
        pred = np.asarray(run["pairs"][key])
        ax.plot(truth, pred, ".", ms=3, alpha=0.5)
        lo, hi = truth.min(), truth.max()
        ax.plot([lo, hi], [lo, hi], "-", lw=0.8, color="0.3")
        ax.set_title(f"{label} (median RMSE {med:.3f} K)", fontsize=9)
        ax.set_xlabel("truth (K)")
        _style(ax)
    axes[0].set_ylabel("prediction (K)")
    fig.tight_layout()
    fig.savefig(path, **_SAVEFIG)
    plt.close(fig)
