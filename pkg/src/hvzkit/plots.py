"""Figure rendering for scan reports and diagnostics.

Everything draws through the Agg backend and writes PNG files, so the
functions work in headless runs. Each returns the path it wrote.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .threshold import MinimizerDiagnostics, ThresholdReport
from .verify import DiscreteSpectrum, HvzScan


def _q_coordinate(q_rows: np.ndarray) -> np.ndarray:
    """Scalar abscissa for Q samples: the first component in one dimension,
    the signed norm along the dominant axis otherwise."""
    if q_rows.shape[1] == 1:
        return q_rows[:, 0]
    norms = np.linalg.norm(q_rows, axis=1)
    lead = q_rows[:, np.argmax(np.ptp(q_rows, axis=0))]
    return np.where(lead < 0, -norms, norms)


def plot_lambda_curves(report: ThresholdReport, path: str | Path) -> Path:
    """Two-cluster energy curves per decomposition with the bottom marked."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for scan in report.scans:
        rows = np.array([p.q for p in scan.coarse.points])
        vals = scan.coarse.values
        x = _q_coordinate(rows)
        order = np.argsort(x)
        ax.plot(x[order], vals[order], "-o", ms=3, label=scan.decomposition)
        for curve in scan.refined:
            rx = _q_coordinate(np.array([p.q for p in curve.points]))
            ax.plot(rx, curve.values, ".", ms=4, alpha=0.6, color=ax.lines[-1].get_color())
    ax.axhline(report.mu, color="k", lw=0.8, ls="--", label=f"bottom {report.mu:.6g}")
    for scan in report.scans:
        if scan.decomposition in report.minimizing and scan.gamma:
            gx = _q_coordinate(np.array(scan.gamma).reshape(len(scan.gamma), -1))
            ax.plot(gx, [scan.min_value] * len(gx), "r*", ms=11, zorder=5)
    ax.set_xlabel("fiber momentum Q")
    ax.set_ylabel("two-cluster energy")
    ax.set_title(f"breakup curves, type {report.alpha}")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_hvz(scan: HvzScan, path: str | Path) -> Path:
    """Trial quotients against separation with the scan bottom as reference."""
    path = Path(path)
    seps = [w.separation for w in scan.levels]
    quots = [w.quotient for w in scan.levels]
    targs = [w.target for w in scan.levels]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(seps, quots, "-o", label="trial quotient")
    ax.plot(seps, targs, "--s", ms=4, label="cluster energy sum")
    ax.axhline(scan.reference, color="k", lw=0.8, ls=":", label="scan bottom")
    ax.set_xlabel("cluster separation")
    ax.set_ylabel("energy")
    ax.set_title("separated-cluster quotients")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_spectrum(ds: DiscreteSpectrum, path: str | Path) -> Path:
    """Low fiber eigenvalues against the essential bottom."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    for e in ds.eigenvalues:
        below = e < ds.mu - ds.atol
        ax.hlines(e, 0.2, 0.8, color="tab:blue" if below else "tab:gray",
                  lw=2.2 if below else 1.2)
    ax.axhline(ds.mu, color="tab:red", lw=1.0, ls="--")
    ax.text(0.84, ds.mu, "essential bottom", va="center", fontsize=8, color="tab:red")
    ax.set_xlim(0, 1.4)
    ax.set_xticks([])
    ax.set_ylabel("energy")
    ax.set_title(f"{len(ds.below)} state(s) below the bottom")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_minimizer_region(diag: MinimizerDiagnostics, path: str | Path) -> Path:
    """Channel value and breakup threshold over the minimizer region."""
    path = Path(path)
    rows = np.array([p.q for p in diag.points])
    x = _q_coordinate(rows)
    order = np.argsort(x)
    lam = np.array([p.value for p in diag.points])[order]
    thr = np.array([p.threshold for p in diag.points])[order]
    disc = np.array([p.is_discrete for p in diag.points])[order]
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    ax.plot(x[order], lam, "-o", ms=4, label="channel value")
    ax.plot(x[order], thr, "--", label="breakup threshold")
    bad = ~disc
    if np.any(bad):
        ax.plot(x[order][bad], lam[bad], "rx", ms=9, label="not discrete")
    ax.set_xlabel("fiber momentum Q")
    ax.set_ylabel("energy")
    status = "clean" if not diag.warnings else f"{len(diag.warnings)} warning(s)"
    ax.set_title(
        f"minimizer region of {diag.decomposition} ({status}), "
        f"{diag.count_coarse} minimizer(s)"
    )
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
