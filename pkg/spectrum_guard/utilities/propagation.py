"""
RSS simulation: path loss, received power, linear-domain aggregation and the
per-sensor reading map.

Distances are meters; grid coordinates are converted with the environment's
pixel size. Absolute powers are dBm, losses are dB.
"""

import json
import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from spectrum_guard.exceptions import InputDomainError, ShapeMismatchError
from spectrum_guard.models import PathLossModel, RadioEnvironment, Scene

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]


def _shadowing(sigma: float, shape, rng: Optional[np.random.Generator]) -> np.ndarray:
    if rng is None or sigma == 0:
        return np.zeros(shape)
    return rng.normal(0.0, sigma, size=shape)


def path_loss(
    model: PathLossModel,
    d: ArrayLike,
    rng: Optional[np.random.Generator] = None
) -> Union[float, np.ndarray]:
    """
    Log-distance path loss ``10 * alpha * log10(max(d, d_ref)) + shadowing``.

    Args:
        model: Path-loss parameters
        d: Distance(s) in meters
        rng: Source for shadowing; no shadowing when None

    Returns:
        Loss in dB, scalar for scalar input

    Raises:
        InputDomainError: If any distance is negative
    """
    distances = np.asarray(d, dtype=np.float64)
    if np.any(distances < 0) or np.any(np.isnan(distances)):
        raise InputDomainError(f"distance must be >= 0, got {d}")
    clamped = np.maximum(distances, model.reference_distance)
    loss = 10.0 * model.alpha * np.log10(clamped)
    loss = loss + _shadowing(model.shadow_sigma, loss.shape, rng)
    if loss.ndim == 0:
        return float(loss)
    return loss


def received_power(
    env: RadioEnvironment,
    tx_power: ArrayLike,
    d: ArrayLike,
    rng: Optional[np.random.Generator] = None
) -> Union[float, np.ndarray]:
    """Power (dBm) received at distance ``d`` meters from a transmitter."""
    result = np.asarray(tx_power, dtype=np.float64) - path_loss(env.model, d, rng)
    if np.ndim(result) == 0:
        return float(result)
    return result


def aggregate_power(levels: Iterable[float]) -> float:
    """
    Sum powers in the linear domain and convert back to dBm.

    An empty input returns ``-inf``; callers substitute the noise floor.
    """
    values = np.asarray(list(levels), dtype=np.float64)
    if values.size == 0:
        return float('-inf')
    return float(aggregate_power_matrix(values[:, None], axis=0)[0])


def aggregate_power_matrix(levels: np.ndarray, axis: int = 0) -> np.ndarray:
    """Vectorized :func:`aggregate_power` along ``axis``."""
    levels = np.asarray(levels, dtype=np.float64)
    if levels.shape[axis] == 0:
        out_shape = levels.shape[:axis] + levels.shape[axis + 1:]
        return np.full(out_shape, -np.inf)
    # shift by the max so 10**(x/10) never underflows for very weak contributions
    peak = np.max(levels, axis=axis, keepdims=True)
    safe_peak = np.where(np.isfinite(peak), peak, 0.0)
    linear = np.sum(np.power(10.0, (levels - safe_peak) / 10.0), axis=axis, keepdims=True)
    with np.errstate(divide='ignore'):
        total = 10.0 * np.log10(linear) + safe_peak
    return np.squeeze(total, axis=axis)


class PathLossProvider(ABC):
    """Pluggable source of mean path loss between transmitters and sensor cells."""

    name: str = "abstract"

    @abstractmethod
    def loss_matrix(
        self,
        tx_locations: np.ndarray,
        sensor_cells: np.ndarray,
        pixel_size: float
    ) -> np.ndarray:
        """
        Mean loss (dB, no shadowing) for every transmitter/sensor pair.

        Args:
            tx_locations: ``(n_tx, 2)`` continuous grid coordinates
            sensor_cells: ``(n_sensors, 2)`` integer cells
            pixel_size: Meters per cell

        Returns:
            ``(n_tx, n_sensors)`` array in dB
        """


class LogDistancePathLoss(PathLossProvider):
    """Distance-driven provider wrapping :func:`path_loss`."""

    def __init__(self, model: PathLossModel):
        self.model = model
        self.name = model.name

    def loss_matrix(self, tx_locations, sensor_cells, pixel_size):
        centers = np.asarray(sensor_cells, dtype=np.float64) + 0.5
        deltas = np.asarray(tx_locations, dtype=np.float64)[:, None, :] - centers[None, :, :]
        distances = np.sqrt(np.sum(deltas ** 2, axis=-1)) * pixel_size
        return path_loss(self.model, distances, rng=None)


class TablePathLoss(PathLossProvider):
    """
    Path loss looked up from precomputed per-transmitter-cell grids.

    Manifest format (JSON)::

        {"name": "...", "grid_size": 100, "pixel_size": 10.0,
         "entries": [{"tx_cell": [i, j], "path": "loss_i_j.bin"}, ...]}

    Each entry file is a row-major float32 little-endian ``grid_size x
    grid_size`` grid of losses (dB) from that transmitter cell to every cell.
    """

    def __init__(self, name: str, grid_size: int, tables: Dict[Tuple[int, int], np.ndarray]):
        self.name = name
        self.grid_size = grid_size
        self.tables = tables

    @classmethod
    def from_manifest(cls, manifest_path: Path) -> 'TablePathLoss':
        manifest_path = Path(manifest_path)
        with open(manifest_path, 'r', encoding='utf-8') as f:
            manifest = json.load(f)
        grid_size = int(manifest['grid_size'])
        tables = {}
        for entry in manifest['entries']:
            cell = tuple(int(v) for v in entry['tx_cell'])
            raw = np.fromfile(manifest_path.parent / entry['path'], dtype='<f4')
            if raw.size != grid_size * grid_size:
                raise ShapeMismatchError(
                    f"{entry['path']} holds {raw.size} values, expected {grid_size * grid_size}"
                )
            tables[cell] = raw.reshape(grid_size, grid_size).astype(np.float64)
        logger.info(f"Loaded {len(tables)} path-loss tables from {manifest_path}")
        return cls(manifest.get('name', manifest_path.stem), grid_size, tables)

    def loss_matrix(self, tx_locations, sensor_cells, pixel_size):
        cells = np.asarray(sensor_cells, dtype=np.int64)
        rows = []
        for x, y in np.asarray(tx_locations, dtype=np.float64):
            key = (int(np.floor(x)), int(np.floor(y)))
            if key not in self.tables:
                raise InputDomainError(f"no path-loss table for transmitter cell {key}")
            rows.append(self.tables[key][cells[:, 0], cells[:, 1]])
        if not rows:
            return np.zeros((0, len(cells)))
        return np.vstack(rows)


def transmitter_contributions(
    env: RadioEnvironment,
    scene: Scene,
    rng: Optional[np.random.Generator] = None,
    provider: Optional[PathLossProvider] = None
) -> np.ndarray:
    """
    Received power (dBm) at every sensor from every transmitter.

    Shadowing is drawn once per (transmitter, sensor) pair, in scene order.

    Returns:
        ``(n_tx, n_sensors)`` array
    """
    provider = provider or LogDistancePathLoss(env.model)
    sensors = scene.sensor_array()
    if not scene.transmitters:
        return np.zeros((0, len(sensors)))
    locations = np.array([t.location for t in scene.transmitters], dtype=np.float64)
    powers = np.array([t.power for t in scene.transmitters], dtype=np.float64)
    loss = provider.loss_matrix(locations, sensors, env.pixel_size)
    loss = loss + _shadowing(env.model.shadow_sigma, loss.shape, rng)
    return powers[:, None] - loss


def floor_readings(aggregate: np.ndarray, noise_floor: float) -> np.ndarray:
    return np.maximum(aggregate, noise_floor)


def compute_rss_map(
    env: RadioEnvironment,
    scene: Scene,
    rng: Optional[np.random.Generator] = None,
    provider: Optional[PathLossProvider] = None
) -> np.ndarray:
    """
    Per-sensor readings (dBm), in ``scene.sensors`` order, floored at the noise floor.
    """
    contributions = transmitter_contributions(env, scene, rng, provider)
    return floor_readings(aggregate_power_matrix(contributions, axis=0), env.noise_floor)
