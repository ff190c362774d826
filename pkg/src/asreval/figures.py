"""Figure rendering for the report path (written next to the tables)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .report import BenchmarkComparison


def render_wer_vs_rtf(points: Sequence[tuple[str, float, float]],
                      path: str | Path) -> Path:
    """Speed/accuracy scatter: one labeled point per model."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 5))
    for model, rtf_pct, wer_pct in points:
        ax.scatter(rtf_pct, wer_pct, s=28)
        ax.annotate(model, (rtf_pct, wer_pct), fontsize=7,
                    xytext=(4, 3), textcoords="offset points")
    ax.set_xlabel("RTF (%)")
    ax.set_ylabel("WER (%)")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_benchmark_comparison(comparison: BenchmarkComparison,
                                path: str | Path) -> Path:
    """Local WER against external benchmark WER, one line per source."""
    path = Path(path)
    models = [row["model"] for row in comparison.rows]
    x = range(len(models))
    fig, ax = plt.subplots(figsize=(8, 5))
    ax.plot(x, [row["local_wer_pct"] for row in comparison.rows],
            marker="o", label="local")
    for benchmark in comparison.benchmarks:
        ys = [row.get(f"{benchmark}_wer_pct") for row in comparison.rows]
        ax.plot(x, ys, marker="s", label=benchmark)
    ax.set_xticks(list(x))
    ax.set_xticklabels(models, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("WER (%)")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_profile_comparison(rows: Sequence[dict], path: str | Path) -> Path:
    """Normalization impact: grouped bars of WER and Bert F1 per profile."""
    path = Path(path)
    profiles = [row["profile"] for row in rows]
    x = range(len(profiles))
    width = 0.35
    fig, ax1 = plt.subplots(figsize=(6, 4))
    ax1.bar([i - width / 2 for i in x],
            [row.get("wer_pct") or 0.0 for row in rows],
            width, label="WER (%)")
    ax1.set_ylabel("WER (%)")
    ax2 = ax1.twinx()
    ax2.bar([i + width / 2 for i in x],
            [row.get("bert_f1") or 0.0 for row in rows],
            width, color="tab:orange", label="Bert F1")
    ax2.set_ylabel("Bert F1")
    ax1.set_xticks(list(x))
    ax1.set_xticklabels(profiles)
    fig.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
