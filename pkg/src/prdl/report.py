"""Render figures from a finished experiment directory.

Reads the delimited outputs written by the harness (trials.csv and the
trace_*.csv convergence logs) and saves matplotlib figures next to them:
objective convergence per solver, and box summaries of the recovery metrics.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _float(row, key):
    v = row.get(key, "")
    return float(v) if v not in ("", None) else None


def render(output_dir, fmt="png"):
    """Write convergence and metric figures into output_dir.

    Returns the list of files created.  Raises FileNotFoundError when
    trials.csv is absent.
    """
    out = Path(output_dir)
    trials_path = out / "trials.csv"
    if not trials_path.exists():
        raise FileNotFoundError(f"no trials.csv in {out}")
    rows = [r for r in _read_csv(trials_path) if r.get("failed") != "1"]
    created = []
    created += _convergence_figure(out, fmt)
    created += _metric_figure(out, rows, fmt)
    return created


def _convergence_figure(out, fmt):
    traces = defaultdict(list)
    for path in sorted(out.glob("trace_*.csv")):
        solver = path.stem.split("_")[2]
        traces[solver].append(_read_csv(path))
    if not traces:
        return []
    fig, ax = plt.subplots(figsize=(7, 4.5))
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for ci, (solver, runs) in enumerate(sorted(traces.items())):
        color = colors[ci % len(colors)]
        for ri, run in enumerate(runs):
            ax.semilogy(
                [int(r["iteration"]) for r in run],
                [max(float(r["objective"]), 1e-300) for r in run],
                color=color,
                alpha=0.35,
                label=solver if ri == 0 else None,
            )
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    ax.set_title("convergence traces")
    ax.legend()
    fig.tight_layout()
    path = out / f"convergence.{fmt}"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]


def _metric_figure(out, rows, fmt):
    if not rows:
        return []
    solvers = sorted({r["solver"] for r in rows})
    metrics = [
        ("mnse_d_db", "MNSE(D) [dB]"),
        ("f_measure", "F-measure"),
        ("iterations_best", "iterations"),
    ]
    fig, axes = plt.subplots(1, len(metrics), figsize=(4 * len(metrics), 4))
    for ax, (key, label) in zip(axes, metrics):
        data = []
        for solver in solvers:
            vals = [_float(r, key) for r in rows if r["solver"] == solver]
            data.append([v for v in vals if v is not None])
        ax.boxplot(data, tick_labels=solvers)
        ax.set_ylabel(label)
    fig.tight_layout()
    path = out / f"metrics.{fmt}"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]
