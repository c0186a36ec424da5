"""Figure rendering for the report commands.

Each report command writes a PNG next to its CSV unless plotting is
disabled. Rendering is best-effort decoration of the delimited output,
which stays the authoritative artifact.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

_A_LABELS = ("a1", "a2", "am1", "am2")


def render_trajectory(traj, path: Path, sim_rows: np.ndarray | None = None) -> None:
    """Stub densities and inactive fractions against time.

    sim_rows, when given, holds matched-unit simulation columns
    (t, a1, a2, am1, am2, tau1, tau2, phi1, phi2) drawn dashed on top.
    """
    fig, (top, bot) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for i, label in enumerate(_A_LABELS):
        top.plot(traj.t, traj.a[:, i], label=label)
    top.set_ylabel("active stub density")
    top.legend(fontsize=8, ncol=4)
    for j in (0, 1):
        bot.plot(traj.t, traj.phi[:, j], label=f"phi{j + 1}")
    if sim_rows is not None:
        for i in range(4):
            top.plot(sim_rows[:, 0], sim_rows[:, 1 + i], "--", lw=0.9)
        for j in (0, 1):
            bot.plot(sim_rows[:, 0], sim_rows[:, 7 + j], "--", lw=0.9,
                     label=f"phi{j + 1} (sim)")
    bot.set_xlabel("t")
    bot.set_ylabel("inactive fraction")
    bot.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_adoption_hist(fractions: np.ndarray, path: Path) -> None:
    """Final adoption per community across replications."""
    fig, ax = plt.subplots(figsize=(6, 4))
    bins = np.linspace(0, 1, 41)
    ax.hist(fractions[:, 0], bins=bins, alpha=0.6, label="community 1")
    ax.hist(fractions[:, 1], bins=bins, alpha=0.6, label="community 2")
    ax.set_xlabel("final adopted fraction")
    ax.set_ylabel("replications")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_sweep(header: list[str], rows: list[list], n_axes: int, path: Path) -> None:
    """Line plot over one sweep axis or heatmap over two.

    Uses the first adoption-like columns it finds; skips silently when the
    sweep shape does not fit either layout.
    """
    adopt_cols = [i for i, name in enumerate(header)
                  if name in ("mf_adopt1", "mf_adopt2", "sim_mean_adopt1", "sim_mean_adopt2")]
    if not rows or not adopt_cols:
        return

    def as_float(x):
        try:
            return float(x)
        except (TypeError, ValueError):
            return np.nan

    data = np.array([[as_float(x) for x in row] for row in rows])
    if n_axes == 1:
        fig, ax = plt.subplots(figsize=(6.5, 4.5))
        x = data[:, 1]
        for col in adopt_cols:
            ax.plot(x, data[:, col], marker="o", ms=3, label=header[col])
        ax.set_xlabel(header[1])
        ax.set_ylabel("adopted fraction")
        ax.legend(fontsize=8)
    elif n_axes == 2:
        xs = np.unique(data[:, 1])
        ys = np.unique(data[:, 2])
        if xs.size * ys.size != len(rows):
            return
        grid = np.nanmean(data[:, adopt_cols], axis=1).reshape(xs.size, ys.size)
        fig, ax = plt.subplots(figsize=(6, 5))
        im = ax.imshow(grid.T, origin="lower", aspect="auto",
                       extent=(xs[0], xs[-1], ys[0], ys[-1]), vmin=0, vmax=1)
        fig.colorbar(im, ax=ax, label="mean adopted fraction")
        ax.set_xlabel(header[1])
        ax.set_ylabel(header[2])
    else:
        return
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
