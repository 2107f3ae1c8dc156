"""Report rendering: delimited per-pair metrics and matplotlib figures.

The evaluation report path can emit, alongside the JSON report, a CSV of
per-pair metrics, a bar chart of per-pair F1/AUC against the macro means,
and one score-matrix heatmap per evaluated pair.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bench import EvalReport
from .matcher import MatchResult


def write_pair_metrics_csv(report: EvalReport, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["left", "right", "f1", "auc", "tp", "fp", "fn", "n_gold", "n_predicted"])
        for e in report.entries:
            writer.writerow(
                [e.left, e.right, "%.6f" % e.f1, "" if e.auc is None else "%.6f" % e.auc,
                 e.tp, e.fp, e.fn, e.n_gold, e.n_predicted]
            )
    return path


def render_metric_bars(report: EvalReport, path) -> Path:
    path = Path(path)
    n = len(report.entries)
    x = np.arange(n)
    f1s = [e.f1 for e in report.entries]
    aucs = [e.auc if e.auc is not None else 0.0 for e in report.entries]

    fig, ax = plt.subplots(figsize=(max(6, 1.2 * n), 4))
    width = 0.38
    ax.bar(x - width / 2, f1s, width, label="F1", color="#4878d0")
    ax.bar(x + width / 2, aucs, width, label="AUC", color="#ee854a")
    ax.axhline(report.macro_f1, color="#4878d0", linestyle="--", linewidth=1,
               label="macro-F1 %.3f" % report.macro_f1)
    if report.macro_auc is not None:
        ax.axhline(report.macro_auc, color="#ee854a", linestyle=":", linewidth=1,
                   label="macro-AUC %.3f" % report.macro_auc)
    ax.set_xticks(x)
    ax.set_xticklabels(
        ["%s\n%s" % (Path(e.left).stem, Path(e.right).stem) for e in report.entries],
        fontsize=7,
    )
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.set_title("Per-pair matching quality")
    ax.legend(fontsize=7, loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_score_heatmap(result: MatchResult, path) -> Path:
    path = Path(path)
    matrix = np.asarray(result.score_matrix)
    n1, n2 = matrix.shape
    fig, ax = plt.subplots(figsize=(max(4, 0.5 * n2 + 2), max(3, 0.4 * n1 + 1.5)))
    im = ax.imshow(matrix, vmin=0.0, vmax=1.0, cmap="viridis", aspect="auto")
    for i, j, _ in result.pairs:
        ax.plot(j, i, "rx", markersize=8, markeredgewidth=2)
    ax.set_xticks(range(n2))
    ax.set_xticklabels(result.right_names, rotation=90, fontsize=6)
    ax.set_yticks(range(n1))
    ax.set_yticklabels(result.left_names, fontsize=6)
    ax.set_xlabel(Path(result.right_schema).stem)
    ax.set_ylabel(Path(result.left_schema).stem)
    fig.colorbar(im, ax=ax, label="ensemble score")
    ax.set_title("Pair scores (x = selected match)")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_eval_report(report: EvalReport, out_dir) -> list[Path]:
    """Write CSV + figures for an evaluation run; returns the created paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [
        write_pair_metrics_csv(report, out_dir / "per_pair_metrics.csv"),
        render_metric_bars(report, out_dir / "metrics.png"),
    ]
    if report.results:
        for k, result in enumerate(report.results):
            written.append(render_score_heatmap(result, out_dir / ("heatmap_%02d.png" % k)))
    return written


def render_ablation_chart(rows: list[dict], path) -> Path:
    """Bar chart comparing configurations; rows carry label/macro_f1/macro_auc."""
    path = Path(path)
    labels = [r["label"] for r in rows]
    f1s = [r["macro_f1"] for r in rows]
    aucs = [r["macro_auc"] if r["macro_auc"] is not None else 0.0 for r in rows]
    x = np.arange(len(rows))
    fig, ax = plt.subplots(figsize=(max(6, 1.4 * len(rows)), 4))
    width = 0.38
    ax.bar(x - width / 2, f1s, width, label="macro-F1", color="#4878d0")
    ax.bar(x + width / 2, aucs, width, label="macro-AUC", color="#ee854a")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=20, ha="right", fontsize=8)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.set_title("Feature-family ablations")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
