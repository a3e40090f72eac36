"""
Figures from evaluation reports and per-sample dumps.
"""

import logging
from collections import OrderedDict
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np

from spectrum_guard.exceptions import EmptyDatasetError
from spectrum_guard.models import EvalReport, SampleResult

logger = logging.getLogger(__name__)


def _by_variant(reports: Sequence[EvalReport]) -> Dict[str, List[EvalReport]]:
    grouped: Dict[str, List[EvalReport]] = OrderedDict()
    for report in reports:
        grouped.setdefault(report.variant, []).append(report)
    for items in grouped.values():
        items.sort(key=lambda r: (r.sweep_value is None, r.sweep_value or 0.0))
    return grouped


def _sweep_label(reports: Sequence[EvalReport]) -> str:
    params = {r.sweep_param for r in reports if r.sweep_param}
    return params.pop() if len(params) == 1 else "cell"


def _require(items, what: str) -> None:
    if not items:
        raise EmptyDatasetError(f"no {what} to plot")


def plot_error_vs_sweep(reports: Sequence[EvalReport], path: Path) -> Path:
    """Mean localization error per sweep value, one line per variant."""
    _require(reports, "reports")
    fig, ax = plt.subplots(figsize=(6, 4))
    for variant, items in _by_variant(reports).items():
        xs = [r.sweep_value if r.sweep_value is not None else k for k, r in enumerate(items)]
        ys = [np.nan if r.localization_error_m is None else r.localization_error_m for r in items]
        ax.plot(xs, ys, marker='o', label=variant)
    ax.set_xlabel(_sweep_label(reports))
    ax.set_ylabel("localization error (m)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    return _save(fig, path)


def stacked_rates(reports: Sequence[EvalReport]) -> List[Tuple[float, float]]:
    """(miss rate, false alarm rate) bar segments, in report order."""
    return [(r.miss_rate, r.false_alarm_rate) for r in reports]


def plot_stacked_rates(reports: Sequence[EvalReport], path: Path) -> Path:
    """Miss rate with false alarm rate stacked on top, grouped by variant."""
    _require(reports, "reports")
    grouped = _by_variant(reports)
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.8 / len(grouped)
    for k, (variant, items) in enumerate(grouped.items()):
        positions = np.arange(len(items)) + k * width
        segments = np.array(stacked_rates(items)).reshape(-1, 2)
        ax.bar(positions, segments[:, 0], width, label=f"{variant} miss")
        ax.bar(positions, segments[:, 1], width, bottom=segments[:, 0], label=f"{variant} false alarm")
        ax.set_xticks(np.arange(len(items)) + width * (len(grouped) - 1) / 2)
        ax.set_xticklabels([
            "-" if r.sweep_value is None else f"{r.sweep_value:g}" for r in items
        ])
    ax.set_xlabel(_sweep_label(reports))
    ax.set_ylabel("miss rate + false alarm rate")
    ax.legend(fontsize='small')
    return _save(fig, path)


def empirical_cdf(values: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Sorted values and their cumulative fractions."""
    xs = np.sort(np.asarray(values, dtype=np.float64))
    ys = np.arange(1, len(xs) + 1) / float(len(xs)) if len(xs) else np.zeros(0)
    return xs, ys


def plot_error_cdf(results: Sequence[SampleResult], path: Path) -> Path:
    """CDF of per-pair localization error, one curve per variant."""
    _require(results, "sample results")
    curves: Dict[str, List[float]] = OrderedDict()
    for result in results:
        curves.setdefault(result.variant, []).extend(result.localization_errors_m)
    fig, ax = plt.subplots(figsize=(6, 4))
    for variant, errors in curves.items():
        xs, ys = empirical_cdf(errors)
        ax.step(xs, ys, where='post', label=variant)
    ax.set_xlabel("localization error (m)")
    ax.set_ylabel("CDF")
    ax.set_ylim(0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend()
    return _save(fig, path)


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    logger.info(f"Saved figure {path}")
    return path
