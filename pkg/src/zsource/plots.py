"""Figure renderers for the CLI report paths.

Everything draws through the Agg backend into a PNG file and returns the
path, so runs stay headless and repeated renders of the same data produce
byte-identical files (fixed dpi, constant metadata).
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import DecayFit, SweepRow
from .sim import Trajectory

_DPI = 120
_META = {"Software": "zsource"}


def _save(fig, path) -> str:
    fig.savefig(path, dpi=_DPI, metadata=_META)
    plt.close(fig)
    return str(path)


def trajectory_figure(traj: Trajectory, path, title: str | None = None) -> str:
    """Two panes, currents on top and voltages below, against time."""
    fig, (ax_i, ax_v) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    labels_i = ("i_L1", "i_L2")
    labels_v = ("v_C1", "v_C2")
    for col, lab in enumerate(labels_i):
        ax_i.plot(traj.t, traj.states[:, col], label=lab, linewidth=0.9)
    for col, lab in zip((2, 3), labels_v):
        ax_v.plot(traj.t, traj.states[:, col], label=lab, linewidth=0.9)
    ax_i.set_ylabel("current [A]")
    ax_v.set_ylabel("voltage [V]")
    ax_v.set_xlabel("t [s]")
    ax_i.legend(loc="upper right")
    ax_v.legend(loc="upper right")
    ax_i.set_title(title if title is not None else f"trajectory ({traj.frame}-frame)")
    fig.tight_layout()
    return _save(fig, path)


def waveform_figure(traj: Trajectory, m: float, omega: float, vin: float, path) -> str:
    """Measured output voltage against the sinusoidal reference."""
    v_o = traj.states[:, 3]
    ref = vin * m * np.sin(omega * traj.t)
    fig, (ax, ax_err) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ax.plot(traj.t, v_o, label="v_o", linewidth=0.9)
    ax.plot(traj.t, ref, label="reference", linewidth=0.9, linestyle="--")
    ax.set_ylabel("voltage [V]")
    ax.legend(loc="upper right")
    ax.set_title(f"output waveform, M={m:g}, omega={omega:g} rad/s")
    ax_err.plot(traj.t, v_o - ref, linewidth=0.9, color="tab:red")
    ax_err.set_ylabel("error [V]")
    ax_err.set_xlabel("t [s]")
    fig.tight_layout()
    return _save(fig, path)


def sweep_figure(rows: list[SweepRow], path) -> str:
    """Sup-norm gap against switching period on log axes, slope-1 guide."""
    t_vals = np.array([r.T for r in rows])
    gaps = np.array([r.sup_gap for r in rows])
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(t_vals, gaps, marker="o", label="sup-norm gap")
    if np.all(gaps > 0.0):
        guide = gaps[0] * t_vals / t_vals[0]
        ax.loglog(t_vals, guide, linestyle=":", color="gray", label="slope 1")
    ax.set_xlabel("switching period T [s]")
    ax.set_ylabel("sup-norm gap")
    ax.set_title("switched vs averaged")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def decay_figure(t: np.ndarray, delta: np.ndarray, fit: DecayFit, path) -> str:
    """Gap norm on a log axis with the fitted envelope overlaid."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    mask = delta > 0.0
    ax.semilogy(t[mask], delta[mask], linewidth=0.9, label="||delta(t)||")
    if not fit.exact and math.isfinite(fit.lambda_fit):
        d0 = delta[0] if delta[0] > 0.0 else 1.0
        env = fit.K_fit * d0 * np.exp(-fit.lambda_fit * t)
        ax.semilogy(t, env, linestyle="--", color="tab:orange",
                    label=f"fit: lambda={fit.lambda_fit:.4g}")
        ax.axvspan(fit.window[0], fit.window[1], color="tab:orange", alpha=0.12,
                   label="fit window")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("gap norm")
    ax.set_title("trajectory difference decay")
    ax.legend(loc="upper right")
    fig.tight_layout()
    return _save(fig, path)
