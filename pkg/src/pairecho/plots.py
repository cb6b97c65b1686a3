"""
Figure rendering for the CLI report path.

Every plot function writes a PNG next to the delimited output it mirrors;
the CSV remains the authoritative record.  Uses the Agg backend so runs
work headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {
    "figure.figsize": (6.0, 4.0),
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _new_axes():
    for k, v in _RC.items():
        plt.rcParams[k] = v
    fig, ax = plt.subplots()
    return fig, ax


def _finish(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path


def save_coherence_figure(path, times, curves: dict[str, np.ndarray],
                          t2_us: float | None = None) -> Path:
    """Coherence vs time for one or more labeled curves."""
    fig, ax = _new_axes()
    for label, values in curves.items():
        ax.plot(times, values, label=label)
    if t2_us is not None:
        ax.axvline(t2_us, color="k", ls=":", lw=1,
                   label=f"T2 = {t2_us:.3g} us")
    ax.set_xlabel("time (us)")
    ax.set_ylabel("coherence")
    ax.set_ylim(0, 1.02)
    ax.legend(loc="best", fontsize=8)
    return _finish(fig, path)


def save_profile_figure(path, bin_centers, mean_alpha2, counts) -> Path:
    """Distance-resolved mean modulation depth (populated bins only)."""
    fig, ax = _new_axes()
    mask = np.asarray(counts) > 0
    ax.plot(np.asarray(bin_centers)[mask], np.asarray(mean_alpha2)[mask],
            "o-", ms=4)
    ax.set_xlabel("internuclear distance (A)")
    ax.set_ylabel("mean modulation depth")
    ax.set_yscale("log")
    return _finish(fig, path)


def save_sweep_figure(path, factors, t2_values) -> Path:
    """T2 versus solvent density factor."""
    fig, ax = _new_axes()
    ax.plot(factors, t2_values, "o-")
    ax.set_xlabel("density factor")
    ax.set_ylabel("T2 (us)")
    return _finish(fig, path)


def save_oracle_figure(path, times, exact, tcl2) -> Path:
    """Exact echo vs pair-kernel curve with their deviation."""
    fig, (ax1, ax2) = plt.subplots(
        2, 1, sharex=True, figsize=(6.0, 5.0),
        gridspec_kw={"height_ratios": [3, 1]},
    )
    ax1.plot(times, exact, label="exact")
    ax1.plot(times, tcl2, "--", label="pair kernel")
    ax1.set_ylabel("coherence")
    ax1.legend(loc="best", fontsize=8)
    ax1.grid(alpha=0.3)
    ax2.plot(times, np.abs(np.asarray(exact) - np.asarray(tcl2)), color="C3")
    ax2.set_xlabel("time (us)")
    ax2.set_ylabel("|deviation|")
    ax2.grid(alpha=0.3)
    return _finish(fig, path)


def save_t2_fit_figure(path, times, values, fit_values,
                       label: str) -> Path:
    """Measured curve with its decay-time fit overlay."""
    fig, ax = _new_axes()
    ax.plot(times, values, ".", ms=3, label="curve")
    ax.plot(times, fit_values, "-", label=label)
    ax.set_xlabel("time (us)")
    ax.set_ylabel("coherence")
    ax.legend(loc="best", fontsize=8)
    return _finish(fig, path)
