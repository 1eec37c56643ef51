"""Matplotlib rendering of the report data to image files.

Every renderer takes already-computed report rows and writes one figure next
to the corresponding CSV; nothing here feeds back into the analysis.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .reports import ComparisonReport

logger = logging.getLogger(__name__)

# Tiny floor so zero p-values stay visible on log axes.
_LOG_FLOOR = 1e-300


def _save(fig, path, digest: str = "") -> Path:
    path = Path(path)
    metadata = {"Description": f"config_digest={digest}"} if digest else None
    fig.savefig(path, dpi=150, bbox_inches="tight", metadata=metadata)
    plt.close(fig)
    logger.info("wrote %s", path)
    return path


def render_diagnostic(rows: Sequence[tuple], path, digest: str = "") -> Path:
    """Whitelist size (blue) and learned-network connectivity (orange) as a
    function of the strength threshold."""
    thresholds = [r[0] for r in rows]
    sizes = [r[1] for r in rows]
    connectivity = [r[2] for r in rows]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(thresholds, sizes, "o-", color="tab:blue", label="whitelist arcs")
    ax.plot(
        thresholds, connectivity, "s-", color="tab:orange", label="network connectivity"
    )
    ax.set_xlabel("arc strength threshold (p-value)")
    ax.set_ylabel("arc count")
    ax.legend()
    ax.grid(True, alpha=0.3)
    return _save(fig, path, digest)


def render_comparison_counts(
    reports: Sequence[ComparisonReport], path, digest: str = ""
) -> Path:
    """Per-algorithm bars: common arcs (green), unique to the algorithm
    (blue), unique to the ensemble (orange)."""
    labels = [r.algorithm.value for r in reports]
    common = [len(r.common) for r in reports]
    unique_single = [len(r.unique_single) for r in reports]
    unique_ensemble = [len(r.unique_ensemble) for r in reports]
    x = np.arange(len(labels))
    width = 0.28
    fig, ax = plt.subplots(figsize=(max(7, 1.2 * len(labels)), 4.5))
    ax.bar(x - width, common, width, color="tab:green", label="common")
    ax.bar(x, unique_single, width, color="tab:blue", label="unique to algorithm")
    ax.bar(
        x + width, unique_ensemble, width, color="tab:orange", label="unique to ensemble"
    )
    ax.set_xticks(x, labels, rotation=30, ha="right")
    ax.set_ylabel("arc count")
    ax.legend()
    ax.grid(True, axis="y", alpha=0.3)
    return _save(fig, path, digest)


def render_strength_scatter(
    report: ComparisonReport, path, digest: str = ""
) -> Path:
    """Log-log scatter of common-arc strengths, single algorithm vs ensemble,
    with the slope-1 diagonal and the stronger/weaker/equal tally."""
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    if report.common:
        single = np.maximum([s for _, s, _ in report.common], _LOG_FLOOR)
        ens = np.maximum([e for _, _, e in report.common], _LOG_FLOOR)
        ax.scatter(single, ens, s=18, alpha=0.7, color="tab:purple")
        lo = min(single.min(), ens.min())
        hi = max(single.max(), ens.max())
        ax.plot([lo, hi], [lo, hi], "k--", linewidth=1, label="slope = 1")
        ax.set_xscale("log")
        ax.set_yscale("log")
    s = report.summary()
    ax.set_title(
        f"{report.algorithm.value}: stronger in ensemble "
        f"{s['stronger_in_ensemble']} ({s['stronger_in_ensemble_pct']}%), "
        f"in algorithm {s['stronger_in_single']} ({s['stronger_in_single_pct']}%), "
        f"equal {s['equal']} ({s['equal_pct']}%)",
        fontsize=9,
    )
    ax.set_xlabel("arc strength, single algorithm (p-value)")
    ax.set_ylabel("arc strength, ensemble (p-value)")
    ax.grid(True, which="both", alpha=0.25)
    return _save(fig, path, digest)


def render_bench_f1(rows: Sequence, path, digest: str = "") -> Path:
    """Mean directed F1 per algorithm across all benchmark cells."""
    by_alg: dict[str, list[float]] = {}
    for r in rows:
        if not r.error:
            by_alg.setdefault(r.algorithm, []).append(r.f1)
    labels = sorted(by_alg)
    means = [float(np.mean(by_alg[a])) for a in labels]
    fig, ax = plt.subplots(figsize=(max(6, 1.1 * len(labels)), 4))
    ax.bar(labels, means, color="tab:cyan")
    ax.set_ylabel("mean directed F1")
    ax.set_ylim(0, 1)
    ax.grid(True, axis="y", alpha=0.3)
    plt.setp(ax.get_xticklabels(), rotation=30, ha="right")
    return _save(fig, path, digest)
