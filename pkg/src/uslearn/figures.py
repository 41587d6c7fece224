"""Render report figures (objective trace, parameter profile, spectrum) to PNG files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .simgraph import ParamMode, ParamSet


def _finish(fig, path: Path) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return str(path)


def trace_figure(trace: list[dict], path: Path) -> str:
    """Objective value, incumbent mncut, and eigengap over outer iterations."""
    its = [t["iteration"] for t in trace]
    fig, axes = plt.subplots(3, 1, figsize=(6.4, 7.2), sharex=True)
    axes[0].plot(its, [t["f_entry"] for t in trace], "o-", label="entry", color="tab:gray")
    axes[0].plot(its, [t["f_exit"] for t in trace], "o-", label="exit", color="tab:blue")
    axes[0].set_ylabel("objective")
    axes[0].legend(loc="best", fontsize=8)
    axes[1].plot(its, [t["incumbent_mncut"] for t in trace], "o-", color="tab:orange")
    axes[1].set_ylabel("mncut")
    axes[2].plot(its, [t["eigengap"] for t in trace], "o-", color="tab:green")
    axes[2].set_ylabel("eigengap")
    axes[2].set_xlabel("outer iteration")
    return _finish(fig, path)


def params_figure(theta: ParamSet, path: Path) -> str:
    """Per-feature parameter profile; one line per cluster (or cluster pair)."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    features = np.arange(1, theta.F + 1)
    if theta.mode is ParamMode.SHARED:
        ax.plot(features, theta.values, "ko-", label="shared")
    elif theta.mode is ParamMode.PAIR:
        for a, b in theta.pair_index_pairs():
            ax.plot(features, theta.values[a, b], "o-", label=f"pair {a + 1},{b + 1}")
    else:
        for c in range(theta.K):
            ax.plot(features, theta.values[c], "o-", label=f"cluster {c + 1}")
    ax.set_xlabel("feature")
    ax.set_ylabel("weight")
    ax.legend(loc="best", fontsize=8)
    return _finish(fig, path)


def spectrum_figure(eigenvalues: np.ndarray, path: Path) -> str:
    """Leading eigenvalues of the final transition matrix."""
    vals = np.asarray(eigenvalues, dtype=float)
    fig, ax = plt.subplots(figsize=(6.4, 3.4))
    ax.bar(np.arange(1, vals.size + 1), vals, color="steelblue")
    ax.set_xlabel("index")
    ax.set_ylabel("eigenvalue")
    ax.set_ylim(min(0.0, float(vals.min())) - 0.05, 1.05)
    return _finish(fig, path)
