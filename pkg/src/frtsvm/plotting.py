"""Matplotlib figures written next to the CSV outputs of the CLI."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.dpi": 120,
    "savefig.bbox": "tight",
}

POS_COLOR = "#1f5fbf"
NEG_COLOR = "#c8362d"


def _figure(width=4.5, height=3.6):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(width, height))
    return fig, ax


def _save(fig, path):
    with plt.rc_context(STYLE):
        fig.savefig(path)
    plt.close(fig)


def _scatter(ax, X, y, size=8):
    for label, color, marker in ((1, POS_COLOR, "o"), (-1, NEG_COLOR, "x")):
        sel = y == label
        ax.scatter(X[sel, 0], X[sel, 1], s=size, c=color, marker=marker, linewidths=0.7,
                   label=f"{label:+d}")


def plot_dataset(data, path, title=None):
    fig, ax = _figure()
    _scatter(ax, data.features, data.labels)
    ax.set_xlabel("$x_1$")
    ax.set_ylabel("$x_2$")
    ax.legend(loc="best", frameon=False)
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_boundary(x1, x2, s_plus, s_minus, labels, path, data=None, title=None):
    """Label field, the two proximal planes (dashed) and the decision curve.

    ``s_plus``/``s_minus`` are signed normalized distances to each plane.
    All grid arrays are ``resolution x resolution`` with x1 varying along
    columns.
    """
    fig, ax = _figure()
    ax.contourf(x1, x2, labels, levels=[-2, 0, 2], colors=[NEG_COLOR, POS_COLOR], alpha=0.12)
    ax.contour(x1, x2, np.abs(s_plus) - np.abs(s_minus), levels=[0.0], colors="k",
               linewidths=1.2)
    ax.contour(x1, x2, s_plus, levels=[0.0], colors=POS_COLOR, linewidths=0.8,
               linestyles="--")
    ax.contour(x1, x2, s_minus, levels=[0.0], colors=NEG_COLOR, linewidths=0.8,
               linestyles="--")
    if data is not None:
        _scatter(ax, data.features, data.labels, size=6)
        ax.legend(loc="best", frameon=False)
    ax.set_xlim(x1.min(), x1.max())
    ax.set_ylim(x2.min(), x2.max())
    ax.set_xlabel("$x_1$")
    ax.set_ylabel("$x_2$")
    if title:
        ax.set_title(title)
    _save(fig, path)


def plot_grid_heatmap(rows, path, g=None):
    """Mean CV accuracy over (c1, c3) at one kernel width (the best one by default)."""
    if g is None:
        best = max(rows, key=lambda r: r["mean_accuracy"])
        g = best["g"]
    sel = [r for r in rows if r["g"] == g]
    c1s = sorted({r["c1"] for r in sel})
    c3s = sorted({r["c3"] for r in sel})
    A = np.full((len(c3s), len(c1s)), np.nan)
    for r in sel:
        A[c3s.index(r["c3"]), c1s.index(r["c1"])] = r["mean_accuracy"]
    fig, ax = _figure(4.8, 3.8)
    im = ax.imshow(A, origin="lower", aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(c1s)), [f"{np.log2(c):.0f}" for c in c1s])
    ax.set_yticks(range(len(c3s)), [f"{np.log2(c):.0f}" for c in c3s])
    ax.set_xlabel(r"$\log_2 c_1$")
    ax.set_ylabel(r"$\log_2 c_3$")
    ax.set_title("CV accuracy (%)" + (f", g = {g:g}" if g != "" else ""))
    fig.colorbar(im, ax=ax)
    _save(fig, path)


def plot_trace(traces, path):
    """``traces`` maps a name to rows of (epoch, objective, gap, active)."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.5, 3.0))
    for name, rows in traces.items():
        rows = np.asarray(rows, dtype=float)
        if rows.size == 0:
            continue
        ax1.plot(rows[:, 0], rows[:, 1], label=name)
        ax2.semilogy(rows[:, 0], np.maximum(rows[:, 2], 1e-16), label=name)
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("dual objective")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("projected-gradient gap")
    ax1.legend(frameon=False)
    _save(fig, path)


def plot_memberships(data, s, path):
    fig, ax = _figure()
    sc = ax.scatter(data.features[:, 0], data.features[:, 1], c=s, s=10, cmap="viridis",
                    vmin=0, vmax=max(float(np.max(s)), 1e-12))
    fig.colorbar(sc, ax=ax, label="membership")
    ax.set_xlabel("$x_1$")
    ax.set_ylabel("$x_2$")
    _save(fig, path)


def plot_timing(table, path):
    names = [m for m, _ in table]
    vals = [t for _, t in table]
    fig, ax = _figure(4.2, 2.6)
    ax.barh(names, vals, color="#777777")
    ax.set_xscale("log")
    ax.set_xlabel("mean wall time (s)")
    _save(fig, path)
