"""Figures for the report directory.

Every figure is drawn from the same rows that go into the CSV files, so a
plot never shows anything the tables do not. The Agg backend is forced;
nothing here opens a window.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 3.6),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "font.size": 9,
}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def schedule_figure(schedule, path, hours: int | None = 168) -> Path:
    """Power balance and hydrogen storage over the first ``hours`` steps."""
    n = len(schedule) if hours is None else min(hours, len(schedule))
    t = [schedule.dt * i for i in range(n)]
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(7.0, 5.0))
        gen = schedule.p_w[:n] + schedule.p_s[:n]
        ax1.fill_between(t, 0, schedule.p_w[:n], step="post", alpha=0.5, label="wind")
        ax1.fill_between(t, schedule.p_w[:n], gen, step="post", alpha=0.5, label="solar")
        ax1.step(t, schedule.p_ae[:n] + schedule.p_as[:n], where="post", color="k", lw=1, label="AE + AS load")
        ax1.step(t, schedule.p_sell[:n], where="post", lw=0.8, label="sold")
        ax1.step(t, -schedule.p_purch[:n], where="post", lw=0.8, label="bought (neg.)")
        ax1.set_ylabel("MW")
        ax1.legend(ncol=3, fontsize=7)
        ax2.step(t, schedule.n_sto[:n], where="post", label="storage")
        ax2.set_ylabel("H$_2$ stored (Nm$^3$)")
        ax2.set_xlabel("hour")
        return _save(fig, path)


def robust_figure(rows, path) -> Path:
    """alpha*, robust tank size and ammonia utilization against beta."""
    beta = [r["beta"] for r in rows]
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.0, 3.0))
        ax1.plot(beta, [r["alpha_star"] for r in rows], "o-")
        ax1.set_xlabel(r"$\beta$")
        ax1.set_ylabel(r"$\alpha^*$")
        ax2.plot(beta, [r["C_HS_robust"] / 1e4 for r in rows], "s-", label="C_HS")
        ax2.set_xlabel(r"$\beta$")
        ax2.set_ylabel(r"robust C$_{HS}$ ($10^4$ Nm$^3$)")
        twin = ax2.twinx()
        twin.plot(beta, [100 * r["r_AS"] for r in rows], "^--", color="C1")
        twin.set_ylabel("r$_{AS}$ (%)")
        return _save(fig, path)


def sweep_figure(rows, path) -> Path:
    """Capacities and DTR against the ammonia scheduling period."""
    dtas = [r["dt_as_h"] for r in rows]
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.0, 3.0))
        for key in ("C_W", "C_S", "C_AE"):
            ax1.plot(dtas, [r[key] for r in rows], "o-", label=key)
        ax1.set_xscale("log")
        ax1.set_xlabel(r"$\Delta T_{AS}$ (h)")
        ax1.set_ylabel("MW")
        ax1.legend()
        ax2.plot(dtas, [r["DTR_1e4_RMB_per_yr"] for r in rows], "o-", color="C3")
        ax2.set_xscale("log")
        ax2.set_xlabel(r"$\Delta T_{AS}$ (h)")
        ax2.set_ylabel(r"DTR ($10^4$ RMB/yr)")
        return _save(fig, path)


def bench_figure(rows, path) -> Path:
    names = [r["scenario"] for r in rows]
    dtr = [r["DTR_1e4_RMB_per_yr"] for r in rows]
    er = [100 * r["ER"] if not math.isnan(r["ER"]) else 0.0 for r in rows]
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7.0, 3.0))
        ax1.bar(names, dtr, color=["C0"] * (len(names) - 1) + ["C3"])
        ax1.axhline(0, color="k", lw=0.6)
        ax1.set_ylabel(r"DTR ($10^4$ RMB/yr)")
        ax2.bar(names, er, color=["C0"] * (len(names) - 1) + ["C3"])
        ax2.axhline(0, color="k", lw=0.6)
        ax2.set_ylabel("earnings ratio (%)")
        return _save(fig, path)
