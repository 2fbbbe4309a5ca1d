"""Figures written next to CLI reports."""
from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

log = logging.getLogger(__name__)


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    log.info("wrote figure %s", path)
    return path


def mixture_bars(symbols, target, mixture, models, path) -> Path:
    """Target, fitted mixture and each context model side by side per symbol."""
    x = np.arange(len(symbols))
    series = [("target", target), ("mixture", mixture)]
    series += [(f"model {i}", m) for i, m in enumerate(models)]
    width = 0.8 / len(series)
    fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(symbols) * len(series)), 3.2))
    for k, (label, probs) in enumerate(series):
        ax.bar(x + (k - (len(series) - 1) / 2) * width, probs, width, label=label)
    ax.set_xticks(x)
    ax.set_xticklabels([str(s) for s in symbols])
    ax.set_ylabel("probability")
    ax.legend(fontsize="small", frameon=False)
    return _save(fig, path)


def anneal_trajectory(rows, gaps, path) -> Path:
    """Success probability and energy along the schedule, plus the gap sweep when available."""
    ncols = 2 if gaps else 1
    fig, axes = plt.subplots(1, ncols, figsize=(4.2 * ncols, 3.2), squeeze=False)
    ax = axes[0, 0]
    s = [r["s"] for r in rows]
    ax.plot(s, [r["success_probability"] for r in rows], color="C0")
    ax.set_xlabel("s = t/T")
    ax.set_ylabel("ground-set probability", color="C0")
    ax.set_ylim(0, 1.02)
    twin = ax.twinx()
    twin.plot(s, [r["energy_expectation"] for r in rows], color="C1", lw=0.8)
    twin.set_ylabel("<H>", color="C1")
    if gaps:
        gx = axes[0, 1]
        gx.semilogy([g[0] for g in gaps], [max(g[1], 1e-16) for g in gaps], color="C2")
        gx.set_xlabel("s")
        gx.set_ylabel("gap")
    return _save(fig, path)


def resupply_scaling(rows, path) -> Path:
    """Log-log trace distance against resupply interval, with a slope-one guide."""
    dts = np.array([r["dt"] for r in rows])
    errs = np.array([r["trace_distance"] for r in rows])
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    ax.loglog(dts, np.maximum(errs, 1e-18), "o-", label="resupply")
    if errs[0] > 0:
        ax.loglog(dts, errs[0] * dts / dts[0], "k--", lw=0.8, label="slope 1")
    ax.set_xlabel("resupply interval")
    ax.set_ylabel("trace distance at T")
    ax.legend(frameon=False, fontsize="small")
    return _save(fig, path)
