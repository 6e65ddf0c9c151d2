"""Static figures for the report series (Agg backend, PNG files)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {"figure.figsize": (6.0, 4.0), "axes.grid": True, "grid.alpha": 0.3,
         "font.size": 9, "savefig.dpi": 120}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_ruling(rows, path):
    z, a, b, da, db = np.asarray(rows, dtype=float).T
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(8, 3.5))
    ax0.plot(z, a, label="a")
    ax0.plot(z, b, label="b")
    ax0.set_xlabel("zeta")
    ax0.legend()
    ax1.plot(z, 2 * da - db ** 2, color="C2")
    ax1.axhline(0, color="k", lw=0.6)
    ax1.set_xlabel("zeta")
    ax1.set_ylabel("2a' - b'^2")
    _save(fig, path)


def _grid(rows):
    t, z, v = np.asarray(rows, dtype=float).T
    tu, zu = np.unique(t), np.unique(z)
    V = np.full((len(tu), len(zu)), np.nan)
    V[np.searchsorted(tu, t), np.searchsorted(zu, z)] = v
    return tu, zu, V


def plot_witness(rows, path):
    tu, zu, V = _grid(rows)
    fig, ax = plt.subplots()
    m = ax.pcolormesh(tu, zu, V.T, shading="auto", cmap="RdBu_r")
    fig.colorbar(m, ax=ax, label="theta")
    ax.set_xlabel("t")
    ax.set_ylabel("zeta")
    _save(fig, path)


def plot_flow(rows, path):
    t, z, chi = np.asarray(rows, dtype=float).T
    fig, ax = plt.subplots()
    for zz in np.unique(z):
        m = z == zz
        ax.plot(t[m], chi[m], lw=0.7, color="C0")
    ax.set_xlabel("t")
    ax.set_ylabel("chi")
    _save(fig, path)


def plot_hardy(rows, path):
    L, n, q = np.asarray(rows, dtype=float).T
    fig, ax = plt.subplots()
    ax.plot(L, q, "o-")
    ax.set_xscale("log")
    ax.set_xlabel("half-width L")
    ax.set_ylabel("discrete infimum")
    _save(fig, path)


def plot_probe(rows, path):
    eps, mom, expm = np.asarray(rows, dtype=float).T
    fig, ax = plt.subplots()
    ax.loglog(eps, mom, "o-", label="|d_tau f|^k")
    ax.loglog(eps, expm, "s-", label="exp(kappa |d_tau f|)")
    ax.invert_xaxis()
    ax.set_xlabel("cutoff")
    ax.legend()
    _save(fig, path)


_PLOTTERS = {"ruling": plot_ruling, "witness": plot_witness, "flow": plot_flow,
             "hardy": plot_hardy, "probe": plot_probe}


def render_series(name, header, rows, path):
    """Render a named series if a figure type exists for it; returns the path or None."""
    fn = _PLOTTERS.get(name)
    if fn is None or not rows:
        return None
    with plt.rc_context(STYLE):
        fn(rows, path)
    return path
