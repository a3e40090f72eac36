"""
Scoring localization and power estimates against ground truth.

Predictions are matched to ground truth by a thresholded greedy minimum-cost
matching; per-sample miss and false-alarm rates are macro-averaged, while
localization and power errors are averaged over every matched pair.
"""

import csv
import json
import logging
import time
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from spectrum_guard.models import EvalReport, LoadedSample, MatchResult, Prediction, SampleResult

logger = logging.getLogger(__name__)

Location = Tuple[float, float]

DENOMINATOR_PREDICTIONS = "predictions"
DENOMINATOR_INTRUDERS = "intruders"
SWEEP_NUM_TX = "num_tx"
SWEEP_DENSITY = "density"


class LocalizationPipeline(Protocol):
    """Anything that turns a loaded sample into a prediction."""

    def predict(self, sample: LoadedSample) -> Prediction:
        ...


def greedy_match(
    gt_locations: Sequence[Location],
    pred_locations: Sequence[Location],
    threshold: float,
    pixel_size: float = 1.0
) -> MatchResult:
    """
    Repeatedly match the globally closest unmatched pair within ``threshold``.

    Distances and threshold are in pixels.
    """
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    n_gt, n_pred = len(gt_locations), len(pred_locations)
    pairs: List[Tuple[int, int, float]] = []
    if n_gt and n_pred:
        dist = cdist(np.asarray(gt_locations, dtype=np.float64), np.asarray(pred_locations, dtype=np.float64))
        order = np.argsort(dist, axis=None, kind='stable')
        gt_used, pred_used = set(), set()
        for flat in order:
            g, p = divmod(int(flat), n_pred)
            d = float(dist[g, p])
            if d > threshold:
                break
            if g in gt_used or p in pred_used:
                continue
            gt_used.add(g)
            pred_used.add(p)
            pairs.append((g, p, d))
    matched_gt = {g for g, _, _ in pairs}
    matched_pred = {p for _, p, _ in pairs}
    return MatchResult(
        pairs=pairs,
        misses=[g for g in range(n_gt) if g not in matched_gt],
        false_alarms=[p for p in range(n_pred) if p not in matched_pred],
        threshold=threshold,
        pixel_size=pixel_size
    )


def compute_rates(
    match: MatchResult,
    n_gt: int,
    n_pred: int,
    false_alarm_denominator: str = DENOMINATOR_PREDICTIONS
) -> Tuple[float, float]:
    """
    Miss rate and false-alarm rate of one sample.

    ``false_alarm_denominator="intruders"`` divides false alarms by the number
    of ground-truth intruders instead of predictions, capped at 1.
    """
    miss_rate = len(match.misses) / n_gt if n_gt else 0.0
    false_alarms = len(match.false_alarms)
    if false_alarm_denominator == DENOMINATOR_INTRUDERS:
        if n_gt:
            false_alarm_rate = min(1.0, false_alarms / n_gt)
        else:
            false_alarm_rate = 1.0 if false_alarms else 0.0
    elif false_alarm_denominator == DENOMINATOR_PREDICTIONS:
        false_alarm_rate = false_alarms / n_pred if n_pred else 0.0
    else:
        raise ValueError(f"unknown false alarm denominator {false_alarm_denominator!r}")
    return miss_rate, false_alarm_rate


def localization_errors(match: MatchResult) -> List[float]:
    """Per-pair error in meters."""
    return [d * match.pixel_size for _, _, d in match.pairs]


def localization_error(match: MatchResult) -> Optional[float]:
    """Mean matched-pair error in meters; None when nothing matched."""
    errors = localization_errors(match)
    return float(np.mean(errors)) if errors else None


def power_errors(
    match: MatchResult,
    gt_powers: Sequence[float],
    pred_powers: Sequence[float]
) -> List[float]:
    return [abs(float(pred_powers[p]) - float(gt_powers[g])) for g, p, _ in match.pairs]


def power_error(
    match: MatchResult,
    gt_powers: Sequence[float],
    pred_powers: Sequence[float]
) -> Optional[float]:
    """Mean absolute power error (dB) over matched pairs."""
    errors = power_errors(match, gt_powers, pred_powers)
    return float(np.mean(errors)) if errors else None


def evaluate_sample(
    sample_id: str,
    gt_locations: Sequence[Location],
    prediction: Prediction,
    threshold: float,
    pixel_size: float = 1.0,
    gt_powers: Optional[Sequence[float]] = None,
    variant: str = "detector",
    sweep_value: Optional[float] = None,
    false_alarm_denominator: str = DENOMINATOR_PREDICTIONS
) -> SampleResult:
    """Match one prediction and collect every per-sample quantity."""
    match = greedy_match(gt_locations, prediction.locations, threshold, pixel_size)
    miss_rate, false_alarm_rate = compute_rates(
        match, len(gt_locations), len(prediction.locations), false_alarm_denominator
    )
    p_errors: List[float] = []
    if gt_powers is not None and prediction.powers is not None:
        p_errors = power_errors(match, gt_powers, prediction.powers)
    return SampleResult(
        sample_id=sample_id,
        variant=variant,
        sweep_value=sweep_value,
        num_gt=len(gt_locations),
        num_pred=len(prediction.locations),
        misses=len(match.misses),
        false_alarms=len(match.false_alarms),
        miss_rate=miss_rate,
        false_alarm_rate=false_alarm_rate,
        localization_errors_m=localization_errors(match),
        power_errors_db=p_errors,
        latency_s=prediction.latency_s
    )


def aggregate_results(
    results: Sequence[SampleResult],
    variant: str = "detector",
    sweep_param: Optional[str] = None,
    sweep_value: Optional[float] = None
) -> EvalReport:
    """Reduce per-sample results to one report cell."""
    loc = [e for r in results for e in r.localization_errors_m]
    pow_ = [e for r in results for e in r.power_errors_db]
    return EvalReport(
        variant=variant,
        sweep_param=sweep_param,
        sweep_value=sweep_value,
        localization_error_m=float(np.mean(loc)) if loc else None,
        miss_rate=float(np.mean([r.miss_rate for r in results])) if results else 0.0,
        false_alarm_rate=float(np.mean([r.false_alarm_rate for r in results])) if results else 0.0,
        power_error_db=float(np.mean(pow_)) if pow_ else None,
        latency_s=float(np.mean([r.latency_s for r in results])) if results else 0.0,
        num_samples=len(results)
    )


def _sweep_key(sample: LoadedSample, sweep_param: Optional[str]) -> Optional[float]:
    if sweep_param == SWEEP_NUM_TX and sample.sweep_value is None:
        return float(len(sample.scene.intruders))
    return sample.sweep_value


def evaluate_dataset(
    pipeline: LocalizationPipeline,
    samples: Iterable[LoadedSample],
    threshold: float,
    pixel_size: float,
    variant: str = "detector",
    sweep_param: Optional[str] = None,
    sweep_values: Optional[Sequence[float]] = None,
    false_alarm_denominator: str = DENOMINATOR_PREDICTIONS,
    workers: int = 1,
    on_sample: Optional[Callable[[SampleResult], None]] = None
) -> Tuple[List[EvalReport], List[SampleResult]]:
    """
    Run ``pipeline`` over every sample and aggregate by sweep cell.

    The cell is the dataset-level ``sweep_value`` carried by the samples; for a
    ``num_tx`` sweep over a mixed dataset it falls back to each sample's
    intruder count. When
    ``sweep_values`` is given, exactly those cells are reported.

    Returns:
        (reports in cell order, per-sample results)
    """
    samples = list(samples)

    def _run(sample: LoadedSample) -> SampleResult:
        started = time.perf_counter()
        prediction = pipeline.predict(sample)
        if not prediction.latency_s:
            prediction = prediction.model_copy(update={'latency_s': time.perf_counter() - started})
        intruders = sample.scene.intruders
        return evaluate_sample(
            sample.sample_id,
            [t.location for t in intruders],
            prediction,
            threshold,
            pixel_size,
            gt_powers=[t.power for t in intruders],
            variant=variant,
            sweep_value=_sweep_key(sample, sweep_param),
            false_alarm_denominator=false_alarm_denominator
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run, samples))
    else:
        results = [_run(s) for s in samples]
    if on_sample:
        for result in results:
            on_sample(result)

    groups: Dict[Optional[float], List[SampleResult]] = OrderedDict()
    if sweep_values is not None:
        for value in sweep_values:
            groups[float(value)] = []
    for result in results:
        key = result.sweep_value
        if sweep_values is not None and key not in groups:
            continue
        groups.setdefault(key, []).append(result)

    reports = [
        aggregate_results(group, variant, sweep_param, key)
        for key, group in groups.items()
    ]
    logger.info(f"Evaluated {len(results)} samples into {len(reports)} report cells ({variant})")
    return reports, results


class OraclePipeline:
    """Returns the ground-truth intruders verbatim."""

    def predict(self, sample: LoadedSample) -> Prediction:
        intruders = sample.scene.intruders
        return Prediction(
            locations=[t.location for t in intruders],
            powers=[t.power for t in intruders],
            raw_powers=[t.power for t in intruders]
        )


def write_reports_json(reports: Sequence[EvalReport], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump([r.model_dump(mode='json') for r in reports], f, indent=2)
    logger.info(f"Wrote {len(reports)} report cells to {path}")
    return path


def write_reports_csv(reports: Sequence[EvalReport], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(EvalReport.CSV_COLUMNS)
        for report in reports:
            writer.writerow(report.csv_row())
    return path


def write_sample_dumps(results: Sequence[SampleResult], path: Path) -> Path:
    """One JSON object per line; the raw material for CDF plots."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for result in results:
            f.write(result.model_dump_json() + "\n")
    return path


def read_reports(path: Path) -> List[EvalReport]:
    with open(path, 'r', encoding='utf-8') as f:
        return [EvalReport(**item) for item in json.load(f)]


def read_sample_dumps(path: Path) -> List[SampleResult]:
    with open(path, 'r', encoding='utf-8') as f:
        return [SampleResult.model_validate_json(line) for line in f if line.strip()]
