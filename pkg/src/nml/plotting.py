"""Figure rendering for CLI reports.  All figures go to files (Agg backend);
nothing here opens a window."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

LABEL_COLORS = {"Trivial": "#ffffff", "SWSSB": "#9ecae1", "LRE": "#08306b"}
LABEL_CODES = {"Trivial": 0, "SWSSB": 1, "LRE": 2}


def plot_xi_vs_round(rounds, curves, path, title=None):
    """curves: mapping label -> xi array aligned with rounds."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for label, xi in curves.items():
        xi = np.asarray(xi, dtype=float)
        keep = np.isfinite(xi)
        ax.plot(np.asarray(rounds)[keep], xi[keep], marker="o", ms=2.5, lw=1, label=label)
    ax.set_xlabel("round")
    ax.set_ylabel(r"correlation length $\xi$")
    if title:
        ax.set_title(title, fontsize=10)
    if curves:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return path


def plot_correlator_decay(series_by_round, path, title=None):
    """series_by_round: mapping round -> CorrelatorSeries."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for rnd, series in series_by_round.items():
        r = [p[0] for p in series.points]
        v = [max(p[1], 1e-16) for p in series.points]
        ax.semilogy(r, v, marker="o", ms=3, lw=1, label=f"t={rnd}")
    ax.set_xlabel("distance")
    ax.set_ylabel("correlator")
    if title:
        ax.set_title(title, fontsize=10)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return path


def plot_phase_diagram(result, path):
    """Label map over (h, t_f) with the refined transition points overlaid."""
    grid = result.grid
    codes = np.vectorize(LABEL_CODES.get)(result.labels)
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    cmap = matplotlib.colors.ListedColormap(
        [LABEL_COLORS["Trivial"], LABEL_COLORS["SWSSB"], LABEL_COLORS["LRE"]]
    )
    h = np.asarray(grid.h_values)
    tf = np.asarray(grid.t_f_values)
    ax.pcolormesh(h, tf, codes.T, cmap=cmap, vmin=0, vmax=2, shading="nearest")
    for hv, trs in result.transitions.items():
        for tr in trs:
            ax.plot([hv], [tr.t_f_refined], "k.", ms=3)
    ax.set_yscale("log")
    ax.set_xlabel("X measurement rate h")
    ax.set_ylabel(r"final time $t_f$")
    ax.set_title(f"{grid.mode} readout, d={grid.d}, J={grid.J}", fontsize=10)
    handles = [plt.Rectangle((0, 0), 1, 1, fc=LABEL_COLORS[k], ec="gray") for k in LABEL_CODES]
    ax.legend(handles, list(LABEL_CODES), fontsize=8, loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return path


def plot_propagator(curve, path):
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.plot(curve.delta_t, curve.value, marker="o", ms=2.5, lw=1)
    ax.set_xlabel(r"$\Delta t$")
    ax.set_ylabel(f"{curve.kind} propagator")
    params = ", ".join(f"{k}={v}" for k, v in curve.params.items())
    ax.set_title(params, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return path


def plot_analytic_table(x, ys, xlabel, path, logy=True):
    """ys: mapping label -> array."""
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for label, y in ys.items():
        (ax.semilogy if logy else ax.plot)(x, y, marker="o", ms=2.5, lw=1, label=label)
    ax.set_xlabel(xlabel)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=160)
    plt.close(fig)
    return path
