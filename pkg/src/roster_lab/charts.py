"""SVG line charts of strategy ratios and trust-error convergence.

Output is byte-stable for fixed inputs: the SVG id salt is pinned and the
date metadata is dropped.
"""
from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_STYLE = {
    "svg.hashsalt": "roster-lab",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def _save(fig, path: Path) -> Path:
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    finally:
        plt.close(fig)
    return path


def ratio_chart(summary: list[dict], column: str, title: str, path) -> Path:
    """One line per strategy, ratio against initial trust."""
    series = defaultdict(list)
    for row in summary:
        series[row["strategy"]].append((float(row["alpha0"]), float(row[column])))
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5.5, 3.6))
        for label in series:
            pts = sorted(series[label])
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=label)
        ax.set_xlabel("initial trust alpha0")
        ax.set_ylabel(column.replace("_", " "))
        ax.set_title(title)
        if series:
            ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        return _save(fig, Path(path))


def trust_error_chart(trust_error: dict, path, strategy: str = "ROSTER") -> Path:
    """Mean squared trust error per interaction, one line per initial trust."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5.5, 3.6))
        keys = sorted(k for k in trust_error if k[1] == strategy)
        for alpha0, _ in keys:
            ys = trust_error[(alpha0, strategy)]
            ax.plot(range(1, len(ys) + 1), ys, label=f"alpha0={alpha0:g}")
        ax.set_xlabel("interaction")
        ax.set_ylabel("mean squared trust error")
        ax.set_title(f"trust prediction error ({strategy})")
        if keys:
            ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        return _save(fig, Path(path))


def write_charts(summary: list[dict], trust_error: dict, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    return [
        ratio_chart(summary, "congestion_ratio", "congestion ratio (vs FC)", out_dir / "congestion_ratio.svg"),
        ratio_chart(summary, "travel_time_ratio", "travel-time ratio (vs SR)", out_dir / "travel_time_ratio.svg"),
        trust_error_chart(trust_error, out_dir / "trust_error.svg"),
    ]
