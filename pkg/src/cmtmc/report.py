"""Matplotlib rendering of command outputs to PNG files.

Rendering is opt-in from the CLI; the delimited files remain the product and
the reproducibility contract applies to them, not to the images.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_RC = {
    "figure.figsize": (8.0, 4.5),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
}


def _save(fig, out_path) -> None:
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def render_convergence(rows_yield, rows_caplet, out_path) -> None:
    """Estimate with +/-3 SE band against path count, yield and caplet panels."""
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, 2, figsize=(10.0, 4.0))
        for ax, rows, label in (
            (axes[0], rows_yield, "terminal yield"),
            (axes[1], rows_caplet, "ATMF caplet"),
        ):
            n = np.array([r[0] for r in rows], dtype=float)
            est = np.array([r[1] for r in rows])
            se = np.array([r[2] for r in rows])
            ax.errorbar(n, est, yerr=3.0 * se, fmt="o-", capsize=3, lw=1)
            ax.set_xscale("log", base=2)
            ax.set_xlabel("paths")
            ax.set_title(f"{label} (3 SE bars)")
        _save(fig, out_path)


def render_sensitivity(param_name: str, rows, out_path) -> None:
    """Expected terminal yield and ATMF caplet against the swept parameter."""
    with plt.rc_context(_RC):
        fig, ax1 = plt.subplots()
        x = np.array([r[0] for r in rows])
        ax1.errorbar(x, [r[1] for r in rows], yerr=[3.0 * r[3] for r in rows],
                     fmt="o-", color="tab:blue", capsize=3, lw=1, label="E[terminal yield]")
        ax1.set_xlabel(param_name)
        ax1.set_ylabel("expected terminal yield", color="tab:blue")
        ax2 = ax1.twinx()
        ax2.errorbar(x, [r[2] for r in rows], yerr=[3.0 * r[4] for r in rows],
                     fmt="s--", color="tab:red", capsize=3, lw=1, label="ATMF caplet")
        ax2.set_ylabel("ATMF caplet price", color="tab:red")
        ax2.grid(False)
        ax1.set_title(f"sensitivity to {param_name}")
        _save(fig, out_path)


def render_surface(points, out_path) -> None:
    """Implied-vol smiles, one line per expiry; non-converged points dropped."""
    by_expiry: dict[float, list] = {}
    for p in points:
        if p.converged:
            by_expiry.setdefault(p.expiry, []).append((p.strike, p.implied_vol))
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for expiry in sorted(by_expiry):
            pts = sorted(by_expiry[expiry])
            ax.plot([k for k, _ in pts], [v for _, v in pts],
                    marker="o", lw=1, label=f"{expiry:g}y")
        ax.set_xlabel("strike")
        ax.set_ylabel("Black implied volatility")
        ax.set_title("implied volatility smiles")
        if by_expiry:
            ax.legend(title="expiry", fontsize=8)
        _save(fig, out_path)


def render_distribution(y_terminal, cmt, yield_vol_abs, out_path) -> None:
    """Histograms of the terminal yield, CMT rate, and yield volatility."""
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, 3, figsize=(12.0, 3.6))
        for ax, data, label in (
            (axes[0], y_terminal, "terminal yield"),
            (axes[1], cmt, "terminal CMT"),
            (axes[2], yield_vol_abs, "|yield volatility|"),
        ):
            ax.hist(np.asarray(data), bins=60, color="tab:blue", alpha=0.8)
            ax.set_title(label)
        _save(fig, out_path)
