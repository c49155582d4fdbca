"""Figure rendering for the report paths: every CSV the CLI writes gets a
matplotlib PNG next to it (convergence curves, annealing traces, benchmark
bars). Headless-safe via the Agg backend."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def plot_convergence(history, path):
    """Lower/upper bound trajectory of a decomposition run.

    history rows: (iter, lb, ub, best_ub, master_obj, sub_cost, cut_kind,
    master_bits, elapsed_s)."""
    its = [r[0] for r in history]
    lbs = [r[1] for r in history]
    best_ubs = [r[3] for r in history]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(
        [i for i, v in zip(its, lbs) if v is not None],
        [v for v in lbs if v is not None],
        marker="o", markersize=3, label="lower bound",
    )
    ax.plot(
        [i for i, v in zip(its, best_ubs) if v is not None],
        [v for v in best_ubs if v is not None],
        marker="s", markersize=3, label="best upper bound",
    )
    cut_its = [r[0] for r in history if r[6] in ("feasibility", "no-good")]
    for k, ci in enumerate(cut_its):
        ax.axvline(ci, color="0.85", zorder=0, label="feasibility cut" if k == 0 else None)
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    ax.set_title("bound convergence")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_sa_trace(trace, path):
    """Annealing trace: best/current energy per sweep plus the temperature.

    trace rows: (sweep, best_energy, current_energy, temperature)."""
    sweeps = [r[0] for r in trace]
    best = [r[1] for r in trace]
    cur = [r[2] for r in trace]
    temp = [r[3] for r in trace]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(sweeps, cur, color="0.7", linewidth=0.8, label="current energy")
    ax.plot(sweeps, best, color="C0", linewidth=1.5, label="best energy")
    ax.set_xlabel("sweep")
    ax.set_ylabel("energy")
    ax2 = ax.twinx()
    ax2.plot(sweeps, temp, color="C3", linewidth=0.8, alpha=0.6, label="temperature")
    ax2.set_ylabel("temperature")
    ax2.set_yscale("log")
    lines, labels = ax.get_legend_handles_labels()
    lines2, labels2 = ax2.get_legend_handles_labels()
    ax.legend(lines + lines2, labels + labels2, loc="upper right")
    ax.set_title("simulated annealing trace")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_bench(reports, path):
    """Grouped objective bars per instance and method, with the oracle line."""
    instances = []
    for r in reports:
        if r.instance not in instances:
            instances.append(r.instance)
    methods = []
    for r in reports:
        if r.method not in methods:
            methods.append(r.method)
    fig, ax = plt.subplots(figsize=(max(6, 1.5 * len(instances)), 4))
    width = 0.8 / max(len(methods), 1)
    for k, method in enumerate(methods):
        xs, ys = [], []
        for i, inst in enumerate(instances):
            row = next((r for r in reports if r.instance == inst and r.method == method), None)
            if row is not None and row.objective is not None:
                xs.append(i + k * width)
                ys.append(row.objective)
        ax.bar(xs, ys, width=width, label=method)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(instances))])
    ax.set_xticklabels(instances, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("objective")
    ax.set_title("benchmark objectives by method")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
