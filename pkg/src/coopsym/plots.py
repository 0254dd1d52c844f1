"""Static SVG emission: polar heatmaps per component and angular profiles."""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402

from .solver import Solution  # noqa: E402


def solution_svg(solution: Solution, path: str):
    """One figure per file: heatmap of every component plus angular cuts.

    The angular profile panel samples three radii at roughly 1/4, 1/2 and
    3/4 of the radial span.
    """
    grid = solution.grid
    m = solution.problem.m
    theta = np.append(grid.theta_nodes, 2 * np.pi)
    fig, axes = plt.subplots(1, m + 1, figsize=(4 * (m + 1), 3.6),
                             subplot_kw={})
    axes = np.atleast_1d(axes)
    fig.subplots_adjust(wspace=0.35)

    tt, rr = np.meshgrid(theta, grid.r_nodes)
    for c in range(m):
        ax = fig.add_subplot(1, m + 1, c + 1, projection="polar")
        axes[c].remove()
        vals = solution.field.values[c]
        closed = np.concatenate([vals, vals[:, :1]], axis=1)
        pcm = ax.pcolormesh(tt, rr, closed, shading="auto", cmap="RdBu_r")
        ax.set_yticklabels([])
        ax.set_title(f"component {c + 1}")
        fig.colorbar(pcm, ax=ax, shrink=0.8)

    ax = axes[m]
    picks = [grid.nr // 4, grid.nr // 2, (3 * grid.nr) // 4]
    for i in picks:
        for c in range(m):
            ax.plot(grid.theta_nodes, solution.field.values[c, i],
                    label=f"c{c + 1}, r={grid.r_nodes[i]:.2f}")
    ax.set_xlabel("theta")
    ax.set_ylabel("value")
    ax.legend(fontsize=7)
    ax.set_title("angular profiles")
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
