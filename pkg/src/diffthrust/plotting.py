"""Static SVG figures. Output is byte-stable for identical data."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "diffthrust"
plt.rcParams["svg.fonttype"] = "none"


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def plot_series(path, t, series: dict, title: str, ylabel: str, xlabel: str = "time (s)"):
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, y in series.items():
        ax.plot(t, y, label=label, lw=1.2)
    ax.set(title=title, xlabel=xlabel, ylabel=ylabel)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")
    _save(fig, path)


def plot_states(path, trace, title: str):
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    cols = (("phi_deg", "roll angle (deg)"), ("p_dps", "roll rate (deg/s)"),
            ("beta_deg", "sideslip (deg)"), ("r_dps", "yaw rate (deg/s)"))
    for ax, (name, label) in zip(axes.flat, cols):
        ax.plot(trace.t, getattr(trace, name), lw=1.2)
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    for ax in axes[1]:
        ax.set_xlabel("time (s)")
    fig.suptitle(title)
    _save(fig, path)


def plot_efforts(path, trace, title: str):
    fig, (a1, a2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    a1.plot(trace.t, trace.da_cmd_deg, "--", lw=1.0, label="commanded")
    a1.plot(trace.t, trace.da_deg, lw=1.2, label="delivered")
    a1.set_ylabel("aileron (deg)")
    a2.plot(trace.t, trace.dT_cmd_lbf, "--", lw=1.0, label="commanded")
    a2.plot(trace.t, trace.dT_lbf, lw=1.2, label="delivered")
    a2.set_ylabel("differential thrust (lbf)")
    a2.set_xlabel("time (s)")
    for ax in (a1, a2):
        ax.grid(True, alpha=0.3)
        ax.legend(loc="best")
    fig.suptitle(title)
    _save(fig, path)


def plot_sigma(path, omega, curves: dict, title: str):
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, sv in curves.items():
        sv = np.atleast_2d(np.asarray(sv).T).T
        for k in range(sv.shape[1]):
            ax.semilogx(omega, 20 * np.log10(np.maximum(sv[:, k], 1e-300)), lw=1.1,
                        label=label if k == 0 else None)
    ax.set(title=title, xlabel="frequency (rad/s)", ylabel="singular value (dB)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="best")
    _save(fig, path)


def plot_margins(path, reports: dict, title: str):
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 4))
    names, gains, phases = [], [], []
    for side, rep in reports.items():
        for c in rep.channels + (rep.multiloop,):
            names.append(f"{side}:{c.channel}")
            hi = c.gain_interval[1]
            gains.append(20 * np.log10(hi) if np.isfinite(hi) else 60.0)
            phases.append(c.phase_margin)
    y = np.arange(len(names))
    a1.barh(y, gains)
    a1.set(yticks=y, yticklabels=names, xlabel="disk gain margin (dB)")
    a2.barh(y, phases)
    a2.set(yticks=y, yticklabels=[], xlabel="disk phase margin (deg)")
    for ax in (a1, a2):
        ax.grid(True, axis="x", alpha=0.3)
    fig.suptitle(title)
    _save(fig, path)


def plot_histograms(path, data: dict, title: str):
    fig, axes = plt.subplots(1, len(data), figsize=(4 * len(data), 3.5))
    for ax, (label, values) in zip(np.atleast_1d(axes), data.items()):
        ax.hist(values, bins=30)
        ax.set(xlabel=label, ylabel="runs")
        ax.grid(True, alpha=0.3)
    fig.suptitle(title)
    _save(fig, path)
