"""Matplotlib renderings of the experiment reports, written next to the data."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def gibbs_figure(path, level_masses, gibbs_masses, depth):
    fig, ax = plt.subplots(figsize=(7, 4))
    x = np.arange(len(level_masses))
    ax.bar(x - 0.2, level_masses, width=0.4, label="reference")
    ax.bar(x + 0.2, gibbs_masses, width=0.4, label="Gibbs")
    ax.set_xlabel(f"depth-{depth} cylinder address")
    ax.set_ylabel("mass")
    ax.legend(frameon=False)
    return _finish(fig, path)


def grid_figure(path, ratios_by_side):
    fig, ax = plt.subplots(figsize=(7, 4))
    for side, (depths, lo, hi) in ratios_by_side.items():
        ax.plot(depths, lo, marker="o", label=f"{side} min ratio")
        ax.plot(depths, hi, marker="s", label=f"{side} max ratio")
    ax.set_xlabel("depth")
    ax.set_ylabel("child/parent mass ratio")
    ax.set_ylim(0, 1)
    ax.legend(frameon=False, fontsize=8)
    return _finish(fig, path)


def spectrum_figure(path, norm_table, essential_bound):
    fig, ax = plt.subplots(figsize=(7, 4))
    ks = np.arange(len(norm_table))
    ax.plot(ks, norm_table, marker="o", label="probe sup ||L^k e||")
    ax.axhline(1.0, color="gray", lw=0.8, ls=":")
    ax.plot(ks, essential_bound**ks, ls="--", label="essential bound^k")
    ax.set_xlabel("k")
    ax.legend(frameon=False)
    return _finish(fig, path)


def decay_figure(path, e_norm, corr_series, lambda_norm, lambda_corr):
    fig, ax = plt.subplots(figsize=(7, 4))
    ks = np.arange(len(e_norm))
    positive = e_norm > 0
    if positive.any():
        ax.semilogy(ks[positive], e_norm[positive], marker="o", label="||L^k v - m nu||")
    for name, series in corr_series.items():
        vals = np.abs(series)
        mask = vals > 1e-15
        if mask.any():
            ax.semilogy(ks[mask], vals[mask], marker="x", label=f"|cov| {name}")
    if lambda_norm and positive.any():
        ax.semilogy(ks, e_norm[1] * lambda_norm ** (ks - 1), ls="--",
                    label=f"rate {lambda_norm:.3f}")
    if lambda_corr:
        ax.plot([], [], " ", label=f"corr rate {lambda_corr:.3f}")
    ax.set_xlabel("k")
    ax.legend(frameon=False, fontsize=8)
    return _finish(fig, path)


def correlation_figure(path, ks, covariances):
    fig, ax = plt.subplots(figsize=(7, 4))
    vals = np.abs(np.asarray(covariances))
    mask = vals > 1e-16
    ax.semilogy(np.asarray(ks)[mask], vals[mask], marker="o")
    ax.set_xlabel("k")
    ax.set_ylabel("|centered correlation|")
    return _finish(fig, path)


def graph_figure(path, increments, fitted_rate):
    fig, ax = plt.subplots(figsize=(7, 4))
    ks = np.arange(len(increments))
    inc = np.asarray(increments)
    mask = inc > 0
    if mask.any():
        ax.semilogy(ks[mask], inc[mask], marker="o", label="||mu_{k+1} - mu_k||")
        if fitted_rate:
            ax.semilogy(ks[mask], inc[mask][0] * fitted_rate ** (ks[mask] - ks[mask][0]),
                        ls="--", label=f"rate {fitted_rate:.3f}")
    ax.set_xlabel("level k")
    ax.legend(frameon=False)
    return _finish(fig, path)


def srb_figure(path, rows):
    fig, ax = plt.subplots(figsize=(7, 4))
    x = np.arange(len(rows))
    fwd = [r.forward_mean for r in rows]
    bwd = [r.backward_mean for r in rows]
    ax.errorbar(x - 0.1, fwd, yerr=[3 * r.forward_stderr for r in rows],
                fmt="o", label="forward mean (3 sigma)")
    ax.errorbar(x + 0.1, bwd, yerr=[3 * r.backward_stderr for r in rows],
                fmt="s", label="backward mean (3 sigma)")
    ax.plot(x, [r.nu_value for r in rows], "k_", markersize=14, label="invariant value")
    labels = ["+" + "".join(map(str, r.word_plus)) + "|-" + "".join(map(str, r.word_minus))
              for r in rows]
    ax.set_xticks(x, labels, rotation=30, fontsize=8)
    ax.legend(frameon=False, fontsize=8)
    return _finish(fig, path)
