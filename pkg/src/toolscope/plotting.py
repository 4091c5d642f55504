"""Report figures. Headless Agg backend; PNG metadata stripped so files are byte-stable."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .evalkit import AblationRow, EvalReport  # noqa: E402

_STYLE = {
    "figure.figsize": (5.0, 3.2),
    "figure.dpi": 100,
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_metrics(report: EvalReport, path: str | Path) -> Path:
    """Recall@k curve, with CSR drawn as markers at the k values it was measured for."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        rk = sorted(report.recall_at_k)
        ax.plot(rk, [report.recall_at_k[k] for k in rk], marker="o", label="Recall@k")
        ck = sorted(report.csr_at_k)
        if ck:
            ax.plot(ck, [report.csr_at_k[k] for k in ck], marker="s", linestyle="none", label="CSR@k")
        ax.set_xlabel("k")
        ax.set_ylabel("score")
        ax.set_ylim(0.0, 1.05)
        if rk:
            ax.set_xticks(rk)
        ax.legend(loc="lower right", frameon=False)
        return _save(fig, path)


def plot_silhouette(curves: Mapping[str, Mapping[int, float]], path: str | Path) -> Path:
    """One line per labelled curve of silhouette against cluster count."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for label, curve in curves.items():
            xs = sorted(curve)
            ax.plot(xs, [curve[x] for x in xs], marker="o", label=label)
        ax.set_xlabel("cluster count")
        ax.set_ylabel("silhouette")
        ax.set_ylim(-1.0, 1.0)
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_ablation(rows: Sequence[AblationRow], path: str | Path) -> Path:
    mark = lambda b: "+" if b else "-"
    labels = [f"R{mark(r.reranker)} M{mark(r.merger)} A{mark(r.autocorrect)}" for r in rows]
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        xs = range(len(rows))
        ax.bar([x - 0.2 for x in xs], [r.csr for r in rows], width=0.4, label="CSR")
        ax.bar([x + 0.2 for x in xs], [r.recall for r in rows], width=0.4, label="Recall")
        ax.set_xticks(list(xs))
        ax.set_xticklabels(labels, rotation=20)
        # headroom so the legend never covers a full-height bar
        ax.set_ylim(0.0, 1.25)
        ax.set_yticks([0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
        ax.set_ylabel("score")
        ax.legend(loc="upper center", ncol=2, frameon=False)
        return _save(fig, path)
