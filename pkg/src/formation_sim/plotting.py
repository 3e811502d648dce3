"""Static figures for a finished run, written to files.

Matplotlib is imported lazily with the non-interactive Agg backend so
the library and CLI work on headless machines.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import analysis

SCENE_FRACTIONS = (0.0, 0.33, 0.66, 1.0)


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _draw_environment(ax, log, rho_m=None):
    if len(log.obstacles):
        ax.plot(log.obstacles[:, 0], log.obstacles[:, 1], "kx", ms=8, mew=2, label="obstacle")
        if rho_m:
            for o in log.obstacles:
                ax.add_patch(_circle(o, rho_m))
    ax.plot(*log.target, marker="*", color="tab:red", ms=14, ls="none", label="target")


def _circle(centre, radius):
    from matplotlib.patches import Circle

    return Circle(centre, radius, fill=False, ls=":", color="0.5")


def _label(log, i):
    return "leader" if i == log.leader_index else f"R{i}"


def plot_paths(log, path, rho_m=None, title=None):
    """Agent paths over the obstacle field, with start and end markers."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 6))
    _draw_environment(ax, log, rho_m)
    for i in range(log.n):
        p = log.positions[:, i]
        (line,) = ax.plot(p[:, 0], p[:, 1], lw=1.4, label=_label(log, i))
        ax.plot(*p[0], "o", color=line.get_color(), ms=4)
        ax.plot(*p[-1], "s", color=line.get_color(), ms=5)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.grid(alpha=0.3)
    ax.legend(loc="upper left", fontsize=8)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_scenes(log, path, rho_m=None, fractions=SCENE_FRACTIONS):
    """Formation snapshots at fixed fractions of the run, edges drawn."""
    plt = _pyplot()
    fig, axes = plt.subplots(1, len(fractions), figsize=(4 * len(fractions), 4), sharex=True, sharey=True)
    last = len(log.positions) - 1
    for ax, frac in zip(np.atleast_1d(axes), fractions):
        k = int(round(frac * last))
        q = log.positions[k]
        _draw_environment(ax, log, rho_m)
        for i, j in log.edges:
            ax.plot(q[[i, j], 0], q[[i, j], 1], "-", color="0.6", lw=1)
        ax.plot(q[:, 0], q[:, 1], "o", color="tab:blue", ms=5)
        ax.plot(*q[log.leader_index], "o", color="tab:red", ms=6)
        ax.set_title(f"k = {k}")
        ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return Path(path)


def plot_metrics(log, path):
    plt = _pyplot()
    k = np.arange(len(log.positions))
    fig, axes = plt.subplots(4, 1, figsize=(7, 9), sharex=True)
    axes[0].plot(k, log.leader_target_distance)
    axes[0].set_ylabel("leader to target")
    axes[1].plot(k, analysis.relative_formation_error(log))
    axes[1].axhline(0.05, color="k", ls="--", lw=0.8)
    axes[1].set_ylabel("max |w|/d")
    axes[2].plot(k, log.min_agent_distance, label="agent-agent")
    if np.isfinite(log.min_obstacle_distance).any():
        axes[2].plot(k, log.min_obstacle_distance, label="agent-obstacle")
    axes[2].set_ylabel("min distance")
    axes[2].legend(fontsize=8)
    axes[3].semilogy(k, np.maximum(log.lyapunov, 1e-300))
    axes[3].set_ylabel("V")
    axes[3].set_xlabel("step k")
    for ax in axes:
        ax.grid(alpha=0.3)
    srm_steps = np.flatnonzero(log.srm.any(axis=1))
    for s in srm_steps:
        axes[0].axvline(s, color="tab:orange", alpha=0.3, lw=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return Path(path)


def render_report(log, outdir, rho_m=None, title=None) -> list[Path]:
    outdir = Path(outdir)
    return [
        plot_paths(log, outdir / "paths.png", rho_m, title),
        plot_scenes(log, outdir / "scenes.png", rho_m),
        plot_metrics(log, outdir / "metrics.png"),
    ]
