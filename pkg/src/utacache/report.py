"""Aggregate per-run metric CSVs and render summary figures."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from pathlib import Path

import numpy as np

METRICS = ("qos_per_request", "consistent_fraction", "miss_ratio", "chrd", "rejected")
# interval 0 has no previous policy, so these two skip it
RECOMPUTE_ONLY = ("consistent_fraction", "chrd")


def read_run(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run_means(rows: list[dict]) -> dict[str, float]:
    out = {}
    for m in METRICS:
        vals = [float(r[m]) for r in rows
                if not (m in RECOMPUTE_ONLY and int(r["interval"]) == 0)]
        out[m] = float(np.mean(vals)) if vals else 0.0
    return out


def aggregate(run_paths) -> list[dict]:
    """One row per (solver, section_len): mean and std across runs of each
    run's interval-averaged metrics."""
    groups: dict[tuple[str, int], list[dict]] = defaultdict(list)
    for path in sorted(str(p) for p in run_paths):
        rows = read_run(path)
        if not rows:
            continue
        key = (rows[0]["solver"], int(rows[0]["section_len"]))
        groups[key].append(run_means(rows))
    table = []
    for (solver, section_len), runs in sorted(groups.items()):
        row = {"solver": solver, "section_len": section_len, "runs": len(runs)}
        for m in METRICS:
            vals = np.array([r[m] for r in runs])
            row[f"{m}_mean"] = float(vals.mean())
            row[f"{m}_std"] = float(vals.std())
        table.append(row)
    return table


def table_csv(table: list[dict]) -> str:
    cols = ["solver", "section_len", "runs"] + [f"{m}_{s}" for m in METRICS
                                                for s in ("mean", "std")]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in table:
        writer.writerow([row[c] if isinstance(row[c], (str, int)) else repr(round(row[c], 12))
                         for c in cols])
    return buf.getvalue()


def render_figures(table: list[dict], hit_paths, out_dir) -> list[Path]:
    """Bar charts of every aggregate metric, plus hit-ratio traces if given."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    solvers = sorted({r["solver"] for r in table})
    sections = sorted({r["section_len"] for r in table})
    width = 0.8 / max(len(solvers), 1)
    fig, axes = plt.subplots(1, len(METRICS), figsize=(4 * len(METRICS), 3.4))
    for ax, metric in zip(np.atleast_1d(axes), METRICS):
        for n, solver in enumerate(solvers):
            rows = {r["section_len"]: r for r in table if r["solver"] == solver}
            xs = np.arange(len(sections)) + n * width
            means = [rows[s][f"{metric}_mean"] if s in rows else np.nan for s in sections]
            errs = [rows[s][f"{metric}_std"] if s in rows else 0.0 for s in sections]
            ax.bar(xs, means, width, yerr=errs, label=solver, capsize=2)
        ax.set_xticks(np.arange(len(sections)) + 0.4 - width / 2)
        ax.set_xticklabels([str(s) for s in sections])
        ax.set_xlabel("section length")
        ax.set_title(metric.replace("_", " "))
    np.atleast_1d(axes)[0].legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "metrics.png"
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    written.append(path)

    hit_paths = sorted(str(p) for p in hit_paths)
    if hit_paths:
        fig, ax = plt.subplots(figsize=(8, 3.4))
        seen = set()
        for p in hit_paths:
            label = Path(p).stem.replace("hit_", "")
            solver = label.split("_s")[0]
            if solver in seen:
                continue
            seen.add(solver)
            rows = read_run(p)
            ax.plot([float(r["time_s"]) for r in rows], [float(r["hit_ratio"]) for r in rows],
                    lw=0.8, label=label)
        ax.set_xlabel("time (s)")
        ax.set_ylabel("hit ratio")
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out_dir / "hit_ratio.png"
        fig.savefig(path, dpi=100, metadata={"Software": None})
        plt.close(fig)
        written.append(path)
    return written
