"""Static figures written next to the CSV outputs of a run."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .pl import PLFunction, iterate_eval  # noqa: E402

FIGSIZE = (6.0, 4.0)
DPI = 120


def _style(ax, xlabel: str, ylabel: str, title: str | None = None) -> None:
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=10)
    ax.grid(alpha=0.3, linewidth=0.5)


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=DPI, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_rates(rows: Sequence[tuple[int, float, float, float]], path: Path) -> Path:
    p = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(p, [r[1] for r in rows], "o-", label="new rate")
    ax.plot(p, [r[2] for r in rows], "s--", label="legacy rate")
    ax.axhline(np.sqrt(2), color="k", lw=0.8, ls=":", label=r"$\sqrt{2}$")
    ax.legend(frameon=False)
    _style(ax, "odd period p", "growth rate")
    return _save(fig, path)


def plot_iterates(f: PLFunction, ns: Sequence[int], path: Path, title: str | None = None) -> Path:
    """f^n against the diagonal; intersections are the period-n candidates."""
    x = np.linspace(f.lo, f.hi, 4001)
    fig, axes = plt.subplots(1, len(ns), figsize=(3.0 * len(ns), 3.0), squeeze=False)
    for ax, n in zip(axes[0], ns):
        ax.plot(x, iterate_eval(f, n, x), lw=0.8)
        ax.plot(x, x, "k", lw=0.6)
        _style(ax, "x", f"f^{n}(x)")
    if title:
        fig.suptitle(title, fontsize=10)
    return _save(fig, path)


def plot_experiment(depths, median_l1, floors, path: Path, title: str | None = None,
                    spread: tuple[Sequence[float], Sequence[float]] | None = None) -> Path:
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(depths, median_l1, "o-", label="median L1 error")
    if spread is not None:
        ax.fill_between(depths, spread[0], spread[1], alpha=0.2)
    ax.plot(depths, floors, "k--", label="theoretical floor")
    ax.set_xticks(list(depths))
    ax.legend(frameon=False)
    _style(ax, "depth (hidden layers)", "L1 error", title)
    return _save(fig, path)


def plot_oscillations(ts, measured, bound, path: Path, title: str | None = None) -> Path:
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.semilogy(ts, measured, "o-", label="measured crossings")
    ax.semilogy(ts, bound, "s--", label="covering-graph lower bound")
    ax.legend(frameon=False)
    _style(ax, "t", "crossings of f^t over I0", title)
    return _save(fig, path)
