"""PNG figures for benchmark and verification reports."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (5.0, 3.4),
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_scaling(results: dict, path) -> Path:
    """Log-log step counts per algorithm with the fitted lines."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name, res in results.items():
            ok = [r for r in res.rows if r.steps_consumed > 0]
            if not ok:
                continue
            n = np.array([r.n for r in ok], float)
            s = np.array([r.steps_consumed for r in ok], float)
            pts = ax.loglog(n, s, "o", ms=4, label=f"{name} (slope {res.slope:.2f}, $R^2$ {res.r2:.3f})")
            if math.isfinite(res.slope):
                ax.loglog(n, np.exp(res.intercept) * n**res.slope, "-", lw=1, color=pts[0].get_color())
        ax.set_xlabel("n")
        ax.set_ylabel("logical steps")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_decay(curve, fit, path) -> Path:
    """Worst-case boundary influence against radius, with the fitted envelope."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ell = np.array([e for e, d in curve if d > 0], float)
        D = np.array([d for e, d in curve if d > 0], float)
        ax.semilogy(ell, D, "o", ms=4, label="D(ell)")
        if len(ell) and math.isfinite(fit.r) and fit.r > 0:
            xs = np.linspace(ell.min(), ell.max(), 50)
            ax.semilogy(xs, fit.C * fit.r ** (-xs), "-", lw=1, label=f"fit C={fit.C:.3g}, r={fit.r:.3g}")
            ax.semilogy(xs, fit.C_envelope * fit.r ** (-xs), "--", lw=1, label=f"envelope C={fit.C_envelope:.3g}")
        ax.set_xlabel("radius")
        ax.set_ylabel("max TV distance")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_lower_bound(report, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ell = [r.ell for r in report.rows]
        ax.semilogy(ell, [r.d_tv for r in report.rows], "o-", ms=4, lw=1, label="root TV distance")
        ax.semilogy(ell, [r.bound for r in report.rows], "--", lw=1, label="bound")
        ax.set_xlabel("depth")
        ax.set_title(f"Delta={report.delta}, k={report.k:g}, lambda={report.lam:.4g}")
        ax.legend(frameon=False)
        return _save(fig, path)
