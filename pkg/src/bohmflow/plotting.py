"""Matplotlib renderers for the CLI report files.

Figures are written with the Agg backend and without a Software/date stamp,
so a rerun with the same data produces the same PNG bytes.
"""
from __future__ import annotations

import json

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 11,
    "axes.labelsize": 12,
    "axes.titlesize": 12,
    "legend.fontsize": 9,
    "lines.linewidth": 1.2,
    "figure.dpi": 100,
    "savefig.dpi": 120,
}


def _save(fig, path, meta: dict | None):
    info = {"Software": None}
    if meta is not None:
        info["Description"] = json.dumps(meta, sort_keys=True)
    fig.savefig(path, metadata=info)
    plt.close(fig)


def plot_trajectories(times, x1, x2, path, title="", meta=None):
    """x1 (solid) and x2 (dashed) against omega t, one colour per pair."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(7, 4.3))
        colors = plt.cm.viridis(np.linspace(0, 0.9, max(len(x1), 1)))
        for k, c in enumerate(colors):
            ax.plot(times, x1[k], color=c)
            ax.plot(times, x2[k], color=c, ls="--")
        ax.set_xlabel(r"$\omega t$")
        ax.set_ylabel(r"$\tilde{x}_1$ (solid), $\tilde{x}_2$ (dashed)")
        ax.set_title(title)
        fig.tight_layout()
        _save(fig, path, meta)


def plot_concurrence(gamma_t, values, path, gamma_t_sd=None, meta=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(gamma_t, values, color="k")
        if gamma_t_sd is not None:
            ax.axvline(gamma_t_sd, color="tab:red", ls=":", label=rf"$\gamma t_{{SD}}$ = {gamma_t_sd:.4f}")
            ax.legend()
        ax.set_xlabel(r"$\gamma t$")
        ax.set_ylabel("concurrence")
        ax.set_ylim(bottom=0)
        fig.tight_layout()
        _save(fig, path, meta)


def plot_amplitude(epsilons, amplitudes, path, meta=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(epsilons, amplitudes, "o-", color="k")
        ax.set_xlabel(r"$\epsilon$")
        ax.set_ylabel(r"max $|\tilde{x}_1(t) - \tilde{x}_1(0)|$")
        fig.tight_layout()
        _save(fig, path, meta)


def plot_walker_marginal(sites, weights, h, path, meta=None):
    """Side-by-side x1 marginals: walker histogram vs lattice weights."""
    n = (weights.shape[0] - 1) // 2
    x = np.arange(-n, n + 1) * h
    w = weights.sum(axis=1)
    w = w / w.sum()
    counts = np.bincount(sites[:, 0] + n, minlength=weights.shape[0]) / len(sites)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.bar(x, counts, width=h, color="0.75", label="walkers")
        ax.plot(x, w, color="k", label="lattice weights")
        ax.set_xlabel(r"$\tilde{x}_1$")
        ax.set_ylabel("probability per site column")
        ax.legend()
        fig.tight_layout()
        _save(fig, path, meta)
