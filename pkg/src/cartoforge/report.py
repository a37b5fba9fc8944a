"""Run reports: similarity-over-iterations figures plus delimited metrics.

Writes, for one persisted run: ``metrics.csv`` (one row per iteration),
``similarity.png`` (joint and marginal similarity curves), and
``summary.json``.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def _iteration_rows(run_dir: Path) -> list[dict]:
    index = json.loads((run_dir / "session.json").read_text("utf-8"))
    rows = []
    for entry in index.get("iterations", []):
        k = entry["index"]
        metrics = json.loads((run_dir / "iterations" / str(k) / "metrics.json").read_text("utf-8"))
        rows.append(
            {
                "iteration": k,
                "similarity": metrics["similarity"],
                "similarity_marginal": metrics.get("similarity_marginal", ""),
                "decision": entry.get("decision", ""),
                "warnings": len(metrics.get("warnings", [])),
            }
        )
    return rows


def write_report(run_dir: str | Path, out_dir: str | Path) -> dict:
    """Render the report files; returns the summary document."""
    run_dir = Path(run_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = json.loads((run_dir / "session.json").read_text("utf-8"))
    rows = _iteration_rows(run_dir)

    csv_path = out_dir / "metrics.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["iteration", "similarity", "similarity_marginal", "decision", "warnings"]
        )
        writer.writeheader()
        writer.writerows(rows)

    fig_path = out_dir / "similarity.png"
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    if rows:
        xs = [r["iteration"] for r in rows]
        ax.plot(xs, [r["similarity"] for r in rows], marker="o", label="joint")
        marginal = [r["similarity_marginal"] for r in rows if r["similarity_marginal"] != ""]
        if len(marginal) == len(rows):
            ax.plot(xs, marginal, marker="s", linestyle="--", label="marginal")
        ax.set_xticks(xs)
    ax.set_xlabel("iteration")
    ax.set_ylabel("cosine similarity")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right")
    ax.set_title(f"run {index.get('run_id', run_dir.name)}")
    fig.tight_layout()
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)

    summary = {
        "run_id": index.get("run_id", run_dir.name),
        "iterations": len(rows),
        "terminated_by": index.get("terminated_by"),
        "initial_similarity": rows[0]["similarity"] if rows else None,
        "final_similarity": rows[-1]["similarity"] if rows else None,
        "figure": str(fig_path),
        "csv": str(csv_path),
    }
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    return summary
