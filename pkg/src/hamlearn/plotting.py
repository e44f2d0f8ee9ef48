"""Optional figures for the CLI report path.

matplotlib is imported lazily so the numerical core never depends on it.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise RuntimeError("figures need matplotlib; install the 'plots' extra") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    # fixed metadata keeps repeated runs byte-identical
    fig.savefig(path, dpi=120, metadata={"Software": None} if path.suffix == ".png" else None)
    return path


def plot_sweep(rows: list[dict], path) -> Path:
    """``L``, ``A/tau`` and ``N`` of the optimal plan against the target error."""
    plt = _pyplot()
    eps = np.array([r["epsilon"] for r in rows])
    fig, axes = plt.subplots(1, 3, figsize=(10, 3.2), sharex=True)
    for ax, key, label in zip(axes, ("L", "A_over_tau", "N"), ("L", "A / tau", "N")):
        ax.plot(eps, [r[key] for r in rows], "o-", ms=3)
        ax.set_xscale("log")
        ax.set_xlabel("epsilon")
        ax.set_ylabel(label)
    axes[2].set_yscale("log")
    axes[0].invert_xaxis()
    path = _save(fig, path)
    plt.close(fig)
    return path


def plot_errors(errors, threshold: float | None, path) -> Path:
    """Per-trial max-abs error with the 1/16/50/84/99 percentile bands."""
    plt = _pyplot()
    errors = np.asarray(errors, dtype=float)
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.plot(np.zeros_like(errors), errors, "k.", alpha=0.5)
    pct = np.percentile(errors, [1, 16, 50, 84, 99])
    ax.hlines(pct, -0.3, 0.3, colors=["0.7", "0.4", "k", "0.4", "0.7"])
    if threshold is not None:
        ax.axhline(threshold, color="r", ls="--", label="target")
        ax.legend()
    ax.set_xlim(-1, 1)
    ax.set_xticks([])
    ax.set_yscale("log")
    ax.set_ylabel("max abs error")
    path = _save(fig, path)
    plt.close(fig)
    return path


def plot_bounds(curves: list[dict], path) -> Path:
    """Noise and squared-bias terms of the error bound against ``A/tau``, one line per ``L``."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.8))
    for c in curves:
        line, = ax.plot(c["A_over_tau"], c["noise"], label=f"L={c['L']}")
        ax.plot(c["A_over_tau"], c["bias2"], ls="--", color=line.get_color())
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("A / tau")
    ax.set_ylabel("bound")
    ax.legend(fontsize=7)
    path = _save(fig, path)
    plt.close(fig)
    return path
