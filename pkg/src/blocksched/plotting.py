"""Figure rendering for report outputs.

Every report command can drop PNGs next to its CSVs: per-node load curves
from a trace, bound-vs-simulation bars from an analysis run, and the
gradient-norm path of a model fit.  Figures are a convenience view of the
delimited output, never the canonical record.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def plot_trace(trace, path, title="per-node load"):
    """Three panels (memory, net in, net out), one line per node."""
    nodes = sorted({row[1] for row in trace.rows})
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2), sharex=True)
    labels = ("memory", "net in", "net out")
    for col, ax in enumerate(axes):
        for node in nodes:
            xs = [r[0] for r in trace.rows if r[1] == node]
            ys = [r[2 + col] for r in trace.rows if r[1] == node]
            ax.step(xs, ys, where="post", label=f"node {node}")
        ax.set_title(labels[col])
        ax.set_xlabel("step")
    axes[0].set_ylabel("elements")
    axes[0].legend(fontsize=8)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_bounds(rows, path, title="communication bound vs simulation"):
    """Grouped bars per instance: bound next to simulated time."""
    fig, ax = plt.subplots(figsize=(max(4.0, 0.9 * len(rows)), 3.4))
    xs = range(len(rows))
    ax.bar([x - 0.2 for x in xs], [r.bound_s for r in rows], width=0.4,
           label="bound")
    ax.bar([x + 0.2 for x in xs], [r.sim_s for r in rows], width=0.4,
           label="simulated")
    ax.set_xticks(list(xs))
    ax.set_xticklabels([f"{r.family}\nk={r.k} r={r.r}" for r in rows], fontsize=7)
    ax.set_ylabel("seconds")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_convergence(grad_norms, path, title="gradient norm per iteration"):
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.semilogy(range(1, len(grad_norms) + 1), grad_norms, marker="o")
    ax.set_xlabel("iteration")
    ax.set_ylabel("|g|")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
