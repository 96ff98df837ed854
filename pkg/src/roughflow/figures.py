"""PNG figure rendering for experiment reports.

Import order matters: the Agg backend is selected before pyplot loads,
so rendering works headless.  Every builder writes one PNG and returns
its path; the CLI attaches the paths to the run report.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

DPI = 120


def _save(fig, path) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    # no embedded timestamp, so identical runs write identical bytes
    fig.savefig(path, dpi=DPI, metadata={"Date": None})
    plt.close(fig)
    return str(path)


def paths_figure(times, paths, path, title: str = "sample paths") -> str:
    paths = np.atleast_2d(np.asarray(paths, dtype=float))
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    for row in paths[:12]:
        ax.plot(times, row, lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("X(t)")
    ax.set_title(title)
    return _save(fig, path)


def convergence_figure(x, series: dict, path, xlabel: str,
                       title: str, reference_slope: float | None = None) -> str:
    """Log-log decay plot of one or more error columns."""
    x = np.asarray(x, dtype=float)
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for label, values in series.items():
        ax.loglog(x, np.asarray(values, dtype=float), "o-", label=label)
    if reference_slope is not None:
        anchor = next(iter(series.values()))[0]
        ax.loglog(x, anchor * (x / x[0]) ** reference_slope, "k--", lw=0.8,
                  label=f"slope {reference_slope:g}")
    ax.set_xlabel(xlabel)
    ax.set_title(title)
    ax.legend(fontsize=8)
    return _save(fig, path)


def snapshot_figure(x_grid, times, values, path,
                    title: str = "transport solution") -> str:
    values = np.asarray(values, dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    for i, t in enumerate(times):
        ax.plot(x_grid, values[i], label=f"t={float(t):.3g}")
    ax.set_xlabel("x")
    ax.set_ylabel("u(t, x)")
    ax.set_title(title)
    ax.legend(fontsize=8)
    return _save(fig, path)


def field_figure(y_grid, field, path, support: float | None = None,
                 title: str = "occupation field") -> str:
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(y_grid, np.asarray(field, dtype=float), lw=0.9)
    if support is not None:
        ax.axvline(-support, color="k", ls=":", lw=0.8)
        ax.axvline(support, color="k", ls=":", lw=0.8)
    ax.set_xlabel("y")
    ax.set_ylabel("field")
    ax.set_title(title)
    return _save(fig, path)


def band_figure(levels, estimates, stderrs, path,
                title: str = "derivative moments") -> str:
    levels = np.asarray(levels, dtype=float)
    est = np.asarray(estimates, dtype=float)
    se = np.asarray(stderrs, dtype=float)
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.errorbar(levels, est, yerr=3.0 * se, fmt="o-", capsize=3)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("mollification level n")
    ax.set_ylabel("estimate")
    ax.set_title(title)
    return _save(fig, path)


def envelope_figure(ms, lhs, envelope, path,
                    title: str = "integral vs envelope") -> str:
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.semilogy(ms, lhs, "o-", label="estimate")
    ax.semilogy(ms, envelope, "s--", label="envelope")
    ax.set_xlabel("m")
    ax.set_title(title)
    ax.legend(fontsize=8)
    return _save(fig, path)


def histogram_figure(values, path, title: str, xlabel: str) -> str:
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.hist(np.asarray(values, dtype=float), bins=40)
    ax.set_xlabel(xlabel)
    ax.set_title(title)
    return _save(fig, path)
