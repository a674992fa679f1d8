"""Figure rendering for the report path.

Draws observed trajectories, ground truth, the deterministic mode
prediction, optional sample fans, and social-attention edges colored by
normalized weight. Figures are written to files (SVG by default) next to
the delimited reports; every attention edge carries the SVG gid
"ssa-edge-<i>-<j>" so downstream tooling can count or restyle edges.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "ssagcn"  # deterministic SVG ids

import matplotlib.pyplot as plt
import numpy as np
from matplotlib import cm, colors

from .social import SsaConfig, ssa_matrix
from .trajdata import TrajectoryWindow, displacements


def _metadata(out_path) -> dict | None:
    # strip the creation date so repeated runs are byte-identical
    if str(out_path).endswith(".svg"):
        return {"Date": None}
    return None


def plot_window(window: TrajectoryWindow, out_path, prediction=None, samples=None,
                show_adjacency: bool = False, edge_threshold: float = 0.0,
                ssa_config: SsaConfig = SsaConfig(), title: str = "") -> int:
    """Render one window; returns the number of attention edges drawn.

    ``prediction``: [t_pred][N][2] mode trajectory; ``samples``:
    [K][t_pred][N][2] fan. Attention edges are drawn at the last observed
    frame for every ordered pair whose normalized off-diagonal weight
    exceeds ``edge_threshold``.
    """
    fig, ax = plt.subplots(figsize=(6, 6))
    obs = window.positions[:window.t_obs]
    gt = window.positions[window.t_obs:]
    n = window.n_agents

    if samples is not None:
        for k in range(samples.shape[0]):
            for i in range(n):
                ax.plot(samples[k, :, i, 0], samples[k, :, i, 1],
                        color="0.8", lw=0.5, zorder=1)
    for i in range(n):
        ax.plot(obs[:, i, 0], obs[:, i, 1], "b--", lw=1.2, zorder=3,
                label="observed" if i == 0 else None)
        ax.plot(gt[:, i, 0], gt[:, i, 1], "r--", lw=1.2, zorder=3,
                label="ground truth" if i == 0 else None)
        if prediction is not None:
            ax.plot(prediction[:, i, 0], prediction[:, i, 1], "g-", lw=1.4,
                    zorder=4, label="prediction" if i == 0 else None)
        ax.plot(obs[-1, i, 0], obs[-1, i, 1], "o", color="tab:blue", ms=6, zorder=5)

    n_edges = 0
    if show_adjacency and n > 1:
        t = window.t_obs - 1
        u = displacements(window).u
        att = ssa_matrix(window.positions[t], u[t], ssa_config, timestep=t)
        norm = colors.Normalize(vmin=0.0, vmax=max(att.normalized.max(), 1e-12))
        cmap = cm.viridis
        pos = window.positions[t]
        for i in range(n):
            for j in range(n):
                if i == j or att.normalized[i, j] <= edge_threshold:
                    continue
                (line,) = ax.plot([pos[i, 0], pos[j, 0]], [pos[i, 1], pos[j, 1]],
                                  color=cmap(norm(att.normalized[i, j])),
                                  lw=1.0, zorder=2)
                line.set_gid(f"ssa-edge-{i}-{j}")
                n_edges += 1
        fig.colorbar(cm.ScalarMappable(norm=norm, cmap=cmap), ax=ax,
                     label="attention weight")

    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.savefig(out_path, bbox_inches="tight", metadata=_metadata(out_path))
    plt.close(fig)
    return n_edges


def plot_training_log(log, out_path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(len(log)), log, lw=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean NLL")
    fig.savefig(out_path, bbox_inches="tight", metadata=_metadata(out_path))
    plt.close(fig)
