"""
Transmit power estimation with overestimation correction.

Every localized transmitter gets a raw PredPower estimate from a crop centered
on it. Transmitters with close-by neighbors overestimate (their crops contain
neighbor energy), so a linear model of the overestimate, fitted on
``[p0', (d, p', p'/d) per neighbor]`` features, is subtracted from them.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
from scipy.spatial.distance import cdist
from sklearn.linear_model import Lasso, LinearRegression, Ridge

from spectrum_guard.exceptions import EmptyDatasetError
from spectrum_guard.models import (
    CorrectionModel,
    CorrectionRecord,
    IsolationRule,
    RegressorType,
)

from .encoding import crop_power_patch
from .evaluation import greedy_match

logger = logging.getLogger(__name__)

Location = Tuple[float, float]

# neighbors closer than this are treated as this far for the p'/d term
MIN_NEIGHBOR_DISTANCE = 1e-3


def _distances(locations: Sequence[Location]) -> np.ndarray:
    points = np.asarray(locations, dtype=np.float64).reshape(-1, 2)
    return cdist(points, points)


def classify_isolated(locations: Sequence[Location], rule: Optional[IsolationRule] = None) -> List[bool]:
    """True where the nearest other estimate is farther than the isolation radius."""
    rule = rule or IsolationRule()
    if len(locations) < 2:
        return [True] * len(locations)
    dist = _distances(locations)
    np.fill_diagonal(dist, np.inf)
    return [bool(v) for v in dist.min(axis=1) > rule.isolation_radius]


@torch.no_grad()
def estimate_raw_powers(
    sensor_image: np.ndarray,
    locations: Sequence[Location],
    predpower: torch.nn.Module
) -> List[float]:
    """PredPower on the 21x21 crop of every location, as one batch."""
    if not locations:
        return []
    patches = np.stack([crop_power_patch(sensor_image, loc) for loc in locations])[:, None]
    predpower.eval()
    device = next(predpower.parameters()).device
    out = predpower(torch.as_tensor(patches, dtype=torch.float32, device=device))
    return [float(v) for v in out.cpu().numpy().reshape(-1)]


def estimate_raw_power(
    sensor_image: np.ndarray,
    tx_location: Location,
    predpower: torch.nn.Module
) -> float:
    """Uncorrected power estimate p' of one transmitter."""
    return estimate_raw_powers(sensor_image, [tx_location], predpower)[0]


def neighbors_of(
    subject_idx: int,
    locations: Sequence[Location],
    powers: Sequence[float],
    radius: float
) -> List[Tuple[float, float]]:
    """(distance, p') of every other estimate within ``radius``, nearest first."""
    sx, sy = locations[subject_idx]
    found = []
    for k, ((x, y), p) in enumerate(zip(locations, powers)):
        if k == subject_idx:
            continue
        d = float(np.hypot(x - sx, y - sy))
        if d <= radius:
            found.append((d, float(p)))
    return sorted(found)


def feature_vector(
    subject_power: float,
    neighbors: Sequence[Tuple[float, float]],
    max_neighbors: int
) -> np.ndarray:
    """
    ``[p0', d1, p1', p1'/d1, ..., dM, pM', pM'/dM]`` with empty slots zero.

    Neighbors are sorted by distance; beyond ``max_neighbors`` only the
    nearest are kept.
    """
    ordered = sorted((float(d), float(p)) for d, p in neighbors)
    if len(ordered) > max_neighbors:
        logger.warning(
            f"{len(ordered)} neighbors exceed the {max_neighbors} feature slots; keeping the nearest"
        )
        ordered = ordered[:max_neighbors]
    features = np.zeros(1 + 3 * max_neighbors, dtype=np.float64)
    features[0] = subject_power
    for slot, (d, p) in enumerate(ordered):
        base = 1 + 3 * slot
        features[base:base + 3] = (d, p, p / max(d, MIN_NEIGHBOR_DISTANCE))
    return features


def build_features(
    subject_idx: int,
    estimates: Sequence[Tuple[Location, float]],
    model: CorrectionModel
) -> np.ndarray:
    """Feature vector of one estimate given all ``(location, p')`` estimates."""
    locations = [loc for loc, _ in estimates]
    powers = [p for _, p in estimates]
    neighbors = neighbors_of(subject_idx, locations, powers, model.neighbor_radius)
    return feature_vector(powers[subject_idx], neighbors, model.max_neighbors)


def _regressor(regressor: RegressorType, alpha: float):
    if regressor == RegressorType.LINEAR or alpha == 0:
        return LinearRegression(fit_intercept=False)
    if regressor == RegressorType.LASSO:
        return Lasso(alpha=alpha, fit_intercept=False, max_iter=100_000)
    return Ridge(alpha=alpha, fit_intercept=False)


def fit_correction(
    records: Sequence[CorrectionRecord],
    alpha: float = 0.01,
    regressor: RegressorType = RegressorType.RIDGE,
    neighbor_radius: float = 20.0
) -> CorrectionModel:
    """
    Fit theta to the overestimates without intercept or feature scaling.

    Ridge minimizes ``||F theta - delta||^2 + alpha ||theta||^2``; ``alpha=0``
    or ``regressor="linear"`` gives ordinary least squares.

    Raises:
        EmptyDatasetError: If there are no records
    """
    if not records:
        raise EmptyDatasetError("no correction records to fit")
    regressor = RegressorType(regressor)
    max_neighbors = max(len(r.neighbors) for r in records)
    features = np.stack([feature_vector(r.subject_power, r.neighbors, max_neighbors) for r in records])
    targets = np.array([r.delta for r in records], dtype=np.float64)

    estimator = _regressor(regressor, alpha)
    estimator.fit(features, targets)
    theta = np.asarray(estimator.coef_, dtype=np.float64).reshape(-1)
    logger.info(
        f"Fitted {regressor.value} correction (alpha={alpha}) on {len(records)} records, M={max_neighbors}"
    )
    return CorrectionModel(
        theta=theta.tolist(),
        max_neighbors=max_neighbors,
        alpha=alpha,
        neighbor_radius=neighbor_radius,
        regressor=regressor
    )


def correct_power(raw_power: float, features: np.ndarray, model: CorrectionModel) -> float:
    """``p' - theta . features``."""
    return float(raw_power - np.dot(np.asarray(model.theta), np.asarray(features, dtype=np.float64)))


def apply_correction(
    locations: Sequence[Location],
    raw_powers: Sequence[float],
    model: Optional[CorrectionModel],
    rule: Optional[IsolationRule] = None
) -> List[float]:
    """Correct non-isolated estimates; isolated ones keep their raw value."""
    rule = rule or IsolationRule()
    if model is None:
        return [float(p) for p in raw_powers]
    isolated = classify_isolated(locations, rule)
    estimates = list(zip(locations, raw_powers))
    return [
        float(p) if isolated[k] else correct_power(p, build_features(k, estimates, model), model)
        for k, p in enumerate(raw_powers)
    ]


def estimate_powers(
    sensor_image: np.ndarray,
    locations: Sequence[Location],
    predpower: torch.nn.Module,
    model: Optional[CorrectionModel] = None,
    rule: Optional[IsolationRule] = None
) -> Tuple[List[float], List[float]]:
    """
    Returns:
        (final powers, raw powers), one per location
    """
    raw = estimate_raw_powers(sensor_image, locations, predpower)
    return apply_correction(locations, raw, model, rule), raw


def collect_correction_records(
    gt_locations: Sequence[Location],
    gt_powers: Sequence[float],
    locations: Sequence[Location],
    raw_powers: Sequence[float],
    threshold: float,
    rule: Optional[IsolationRule] = None
) -> List[CorrectionRecord]:
    """
    Training records from estimated locations matched to ground truth.

    Only matched, non-isolated estimates contribute; their target is the raw
    estimate minus the matched true power.
    """
    rule = rule or IsolationRule()
    if not locations:
        return []
    isolated = classify_isolated(locations, rule)
    match = greedy_match(gt_locations, locations, threshold)
    records = []
    for g, p, _ in match.pairs:
        if isolated[p]:
            continue
        records.append(CorrectionRecord(
            subject_power=float(raw_powers[p]),
            neighbors=neighbors_of(p, locations, raw_powers, rule.neighbor_radius),
            delta=float(raw_powers[p]) - float(gt_powers[g])
        ))
    return records
