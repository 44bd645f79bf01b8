"""Figures for learning runs, rendered to files with the Agg backend."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .learning import CaseReport  # noqa: E402
from .model import Network, iter_params, param_label  # noqa: E402


def trajectories(net: Network, reports: Sequence[CaseReport]) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Mean and std of every parameter after 0, 1, ..., n cases.

    Rejected cases repeat the previous row.
    """
    params = list(iter_params(net))
    labels = [param_label(net, pid) for pid, _ in params]
    means = np.empty((len(reports) + 1, len(params)))
    stds = np.empty_like(means)
    means[0] = [gp.mean for _, gp in params]
    stds[0] = [gp.std for _, gp in params]
    for i, rep in enumerate(reports, 1):
        if rep.error is not None:
            means[i], stds[i] = means[i - 1], stds[i - 1]
            continue
        means[i] = [u.new_mean for u in rep.updates]
        stds[i] = [np.sqrt(u.new_var) for u in rep.updates]
    return labels, means, stds


def plot_learning(net: Network, reports: Sequence[CaseReport], path, truth: Sequence[float] | None = None):
    labels, means, stds = trajectories(net, reports)
    n_par = len(labels)
    cols = min(4, n_par)
    rows = -(-n_par // cols)
    fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 2.4 * rows), squeeze=False, sharex=True)
    steps = np.arange(means.shape[0])
    for k, ax in enumerate(axes.flat):
        if k >= n_par:
            ax.set_visible(False)
            continue
        ax.plot(steps, means[:, k], lw=1.2, color="C0")
        ax.fill_between(steps, means[:, k] - stds[:, k], means[:, k] + stds[:, k], color="C0", alpha=0.25, lw=0)
        if truth is not None:
            ax.axhline(truth[k], color="k", ls="--", lw=0.8)
        ax.set_title(labels[k], fontsize=8)
        ax.set_ylim(0, 1)
        ax.tick_params(labelsize=7)
    for ax in axes[-1]:
        ax.set_xlabel("cases", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
