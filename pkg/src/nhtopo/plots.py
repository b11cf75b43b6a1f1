"""Figure rendering for scan tables, texture series and pulse schedules.

All functions save PNG files next to the delimited output and return the
path written.  The Agg backend is forced so rendering works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = [
    "plot_scan_angles",
    "plot_scan_energies",
    "plot_energy_loop",
    "plot_texture_series",
    "plot_schedule",
    "plot_phase_diagram",
]


def _finish(fig, path):
    path = Path(path)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_scan_angles(rows, path, title=None):
    """phi_pp, phi_mm and their half-sum versus k."""
    ok = [r for r in rows if r.status == "ok"]
    ks = np.array([r.k for r in ok]) / np.pi
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    ax.plot(ks, [r.phi_pp for r in ok], "o-", ms=3, lw=0.8, label=r"$\phi^{++}$")
    ax.plot(ks, [r.phi_mm for r in ok], "s-", ms=3, lw=0.8, label=r"$\phi^{--}$")
    ax.plot(ks, [r.re_phi for r in ok], "k.--", ms=4, lw=0.8, label="half-sum")
    ax.set_xlabel(r"$k/\pi$")
    ax.set_ylabel("angle (rad)")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    return _finish(fig, path)


def plot_scan_energies(rows, path, title=None):
    """Re(E) and Im(E) versus k."""
    ok = [r for r in rows if r.status == "ok"]
    ks = np.array([r.k for r in ok]) / np.pi
    fig, axes = plt.subplots(1, 2, figsize=(7.4, 3.0), sharex=True)
    axes[0].plot(ks, [r.reE for r in ok], "o-", ms=3, lw=0.8, color="tab:blue")
    axes[0].set_ylabel(r"$\mathrm{Re}\,E$")
    axes[1].plot(ks, [r.imE for r in ok], "o-", ms=3, lw=0.8, color="tab:red")
    axes[1].set_ylabel(r"$\mathrm{Im}\,E$")
    for ax in axes:
        ax.set_xlabel(r"$k/\pi$")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _finish(fig, path)


def plot_energy_loop(energies, path, title=None):
    """Band trajectories on the complex energy plane."""
    E = np.asarray(energies, dtype=complex)
    fig, ax = plt.subplots(figsize=(3.8, 3.6))
    for sign, color in ((1, "tab:blue"), (-1, "tab:red")):
        ax.plot(sign * E.real, sign * E.imag, ".", ms=2, color=color,
                label=f"band {'+' if sign > 0 else '-'}")
    ax.axhline(0, color="0.8", lw=0.6)
    ax.axvline(0, color="0.8", lw=0.6)
    ax.set_xlabel(r"$\mathrm{Re}\,E$")
    ax.set_ylabel(r"$\mathrm{Im}\,E$")
    ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    return _finish(fig, path)


def plot_texture_series(series_list, path, labels=None, title=None):
    """sx(t) and sy(t), several series overlaid (e.g. dilated vs exact)."""
    if not isinstance(series_list, (list, tuple)):
        series_list = [series_list]
    labels = labels or [s.meta for s in series_list]
    fig, axes = plt.subplots(2, 1, figsize=(5.4, 4.4), sharex=True)
    styles = ["o", "-", "--", ":"]
    for i, s in enumerate(series_list):
        st = styles[i % len(styles)]
        kw = dict(ms=3, lw=1.0)
        axes[0].plot(s.times, s.sx, st, label=labels[i], **kw)
        axes[1].plot(s.times, s.sy, st, **kw)
    axes[0].set_ylabel(r"$\langle\sigma_x\rangle$")
    axes[1].set_ylabel(r"$\langle\sigma_y\rangle$")
    axes[1].set_xlabel("t")
    axes[0].legend(fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _finish(fig, path)


def plot_schedule(schedule, path, title=None):
    """Control coefficients of the dilated generator over time."""
    t = (np.arange(schedule.n_slices) + 0.5) * schedule.tau
    fig, axes = plt.subplots(1, 2, figsize=(7.6, 3.0), sharex=True)
    for a in range(4):
        axes[0].plot(t, schedule.lam[:, a], lw=1.0, label=rf"$\lambda_{a}$")
        axes[1].plot(t, schedule.gam[:, a], lw=1.0, label=rf"$\gamma_{a}$")
    for ax in axes:
        ax.set_xlabel("t")
        ax.legend(fontsize=7, ncol=2)
    axes[0].set_ylabel("system coefficients")
    axes[1].set_ylabel("coupling coefficients")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _finish(fig, path)


def plot_phase_diagram(records, path, title=None):
    """Heatmap of w_t over the (J0, delta) plane; failures left blank."""
    j0s = sorted({r["J0"] for r in records})
    ds = sorted({r["delta"] for r in records})
    grid = np.full((len(ds), len(j0s)), np.nan)
    for r in records:
        if r["status"] == "ok":
            grid[ds.index(r["delta"]), j0s.index(r["J0"])] = r["w_t"]
    fig, ax = plt.subplots(figsize=(4.6, 3.6))
    im = ax.pcolormesh(j0s, ds, grid, shading="nearest", cmap="viridis")
    fig.colorbar(im, ax=ax, label=r"$w_t$")
    ax.set_xlabel(r"$J_0$")
    ax.set_ylabel(r"$\delta$")
    if title:
        ax.set_title(title)
    return _finish(fig, path)
