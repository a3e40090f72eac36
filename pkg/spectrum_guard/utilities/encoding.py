"""
Conversions between physical quantities and network tensors.

Covers sensor-image normalization, Gaussian peak labels, the authorized-user
channel, detector preprocessing, power crops, testbed upsampling, tiling and
the on-disk matrix format.
"""

import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch

from spectrum_guard.exceptions import DatasetError, InputDomainError, ShapeMismatchError
from spectrum_guard.models import PeakSpec, Scene, TestbedLayout, Transmitter

logger = logging.getLogger(__name__)

DETECTOR_INPUT_SIZE = 416
POWER_PATCH_SIZE = 21
MATRIX_DTYPE = '<f4'


def _scale(noise_floor: float) -> float:
    return -noise_floor / 2.0


def normalize_power(power_dbm, noise_floor: float):
    """``(p - N) / (-N / 2)``; 0 at the noise floor."""
    return (np.asarray(power_dbm, dtype=np.float64) - noise_floor) / _scale(noise_floor)


def encode_sensor_image(
    readings: Sequence[float],
    scene: Scene,
    noise_floor: float
) -> np.ndarray:
    """
    Place normalized readings on the grid; cells without a sensor are 0.

    Args:
        readings: One dBm reading per sensor, in ``scene.sensors`` order
        scene: Scene providing the sensor cells and grid size
        noise_floor: Noise floor in dBm

    Raises:
        ShapeMismatchError: If readings and sensors differ in count
        InputDomainError: If any reading is below the noise floor
    """
    values = np.asarray(readings, dtype=np.float64)
    cells = scene.sensor_array()
    if values.shape != (len(cells),):
        raise ShapeMismatchError(f"expected {len(cells)} readings, got shape {values.shape}")
    if np.any(values < noise_floor):
        raise InputDomainError(f"reading {values.min():.3f} dBm below noise floor {noise_floor} dBm")
    size = scene.config.grid_size
    image = np.zeros((size, size), dtype=np.float64)
    if len(cells):
        image[cells[:, 0], cells[:, 1]] = normalize_power(values, noise_floor)
    return image


def decode_sensor_image(image: np.ndarray, scene: Scene, noise_floor: float) -> np.ndarray:
    """Recover dBm readings at the sensor cells of ``scene``."""
    cells = scene.sensor_array()
    if len(cells) == 0:
        return np.zeros(0)
    values = np.asarray(image, dtype=np.float64)[cells[:, 0], cells[:, 1]]
    return values * _scale(noise_floor) + noise_floor


def _render_peaks(
    locations: Sequence[Tuple[float, float]],
    amplitudes: Sequence[float],
    grid_size: int,
    spec: PeakSpec
) -> np.ndarray:
    image = np.zeros((grid_size, grid_size), dtype=np.float64)
    half = spec.half_width
    two_var = 2.0 * spec.sigma ** 2
    for (x, y), amplitude in zip(locations, amplitudes):
        ci, cj = int(np.floor(x)), int(np.floor(y))
        rows = np.arange(max(ci - half, 0), min(ci + half + 1, grid_size))
        cols = np.arange(max(cj - half, 0), min(cj + half + 1, grid_size))
        if rows.size == 0 or cols.size == 0:
            continue
        du = (rows + 0.5 - x)[:, None]
        dv = (cols + 0.5 - y)[None, :]
        peak = amplitude * np.exp(-(du ** 2 + dv ** 2) / two_var)
        window = image[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
        np.maximum(window, peak, out=window)
    return image


def render_label(
    transmitters: Sequence[Transmitter],
    spec: Optional[PeakSpec] = None,
    grid_size: int = 100
) -> np.ndarray:
    """
    Gaussian peak image: one ``spec.amplitude`` bump per transmitter.

    Each bump is evaluated at pixel centers over the window anchored on the
    transmitter's cell; overlapping bumps combine by element-wise max.
    """
    spec = spec or PeakSpec()
    locations = [t.location for t in transmitters]
    return _render_peaks(locations, [spec.amplitude] * len(locations), grid_size, spec)


def encode_authorized_channel(
    authorized: Sequence[Transmitter],
    noise_floor: float,
    spec: Optional[PeakSpec] = None,
    grid_size: int = 100
) -> np.ndarray:
    """Peak image whose peak heights are the normalized authorized powers."""
    spec = spec or PeakSpec()
    locations = [t.location for t in authorized]
    heights = [float(normalize_power(t.power, noise_floor)) for t in authorized]
    return _render_peaks(locations, heights, grid_size, spec)


def stack_channels(sensor_image: np.ndarray, authorized_channel: np.ndarray) -> np.ndarray:
    """Two-channel input: readings first, authorized users second."""
    if sensor_image.shape != authorized_channel.shape:
        raise ShapeMismatchError(
            f"channel shapes differ: {sensor_image.shape} vs {authorized_channel.shape}"
        )
    return np.stack([sensor_image, authorized_channel], axis=0)


def nearest_indices(source_size: int, target_size: int = DETECTOR_INPUT_SIZE) -> np.ndarray:
    """Source index ``floor(i * source / target)`` for every target index."""
    return (np.arange(target_size) * source_size) // target_size


def detector_preprocess(
    image: np.ndarray,
    source_size: int = 100,
    target_size: int = DETECTOR_INPUT_SIZE
) -> np.ndarray:
    """
    Triplicate channels and nearest-neighbor resize a peak image.

    Returns:
        ``(3, target_size, target_size)`` array with only source values
    """
    image = np.asarray(image)
    if image.shape != (source_size, source_size):
        raise ShapeMismatchError(
            f"detector input must be {source_size}x{source_size}, got {image.shape}"
        )
    idx = nearest_indices(source_size, target_size)
    resized = image[np.ix_(idx, idx)]
    return np.repeat(resized[None, :, :], 3, axis=0)


def detector_preprocess_batch(
    images: torch.Tensor,
    target_size: int = DETECTOR_INPUT_SIZE
) -> torch.Tensor:
    """Batched torch form of :func:`detector_preprocess` for ``(B, 1, H, H)`` input."""
    if images.dim() != 4 or images.shape[1] != 1 or images.shape[2] != images.shape[3]:
        raise ShapeMismatchError(f"expected (B, 1, H, H) images, got {tuple(images.shape)}")
    idx = torch.as_tensor(
        nearest_indices(images.shape[-1], target_size),
        device=images.device,
        dtype=torch.long
    )
    resized = images.index_select(2, idx).index_select(3, idx)
    return resized.expand(-1, 3, -1, -1).contiguous()


def crop_power_patch(
    sensor_image: np.ndarray,
    tx_location: Tuple[float, float],
    size: int = POWER_PATCH_SIZE
) -> np.ndarray:
    """
    ``size x size`` window centered on the transmitter's cell.

    Pixels outside the field are 0 (the normalized noise floor).
    """
    image = np.asarray(sensor_image, dtype=np.float64)
    half = size // 2
    rows, cols = image.shape
    ci = int(np.clip(np.floor(tx_location[0]), 0, rows - 1))
    cj = int(np.clip(np.floor(tx_location[1]), 0, cols - 1))
    padded = np.pad(image, half, mode='constant', constant_values=0.0)
    return padded[ci:ci + size, cj:cj + size].copy()


def upsample_testbed_grid(
    sensors: Sequence[Tuple[int, int]],
    rng: np.random.Generator,
    grid_size: int = 10,
    pixel_size: float = 3.2,
    repeats: int = 5,
    edge: int = 5
) -> TestbedLayout:
    """
    Expand a small testbed layout to a large simulated field.

    Each cell is split 2x2 with every sensor moved to a random subcell, then the
    doubled layout is tiled ``repeats x repeats``. Transmitter candidates are
    the cells of each tile at least ``edge`` cells from the tile border.
    """
    tile = 2 * grid_size
    for a, b in sensors:
        if not (0 <= a < grid_size and 0 <= b < grid_size):
            raise InputDomainError(f"testbed sensor ({a}, {b}) outside {grid_size}x{grid_size}")
    if 2 * edge >= tile:
        raise InputDomainError(f"edge {edge} leaves no interior in a {tile}-cell tile")
    offsets = rng.integers(0, 2, size=(len(sensors), 2))
    doubled = [(2 * a + int(da), 2 * b + int(db)) for (a, b), (da, db) in zip(sensors, offsets)]
    interior = [(r, c) for r in range(edge, tile - edge) for c in range(edge, tile - edge)]

    layout_sensors: List[Tuple[int, int]] = []
    candidates: List[Tuple[int, int]] = []
    for ti in range(repeats):
        for tj in range(repeats):
            base_r, base_c = ti * tile, tj * tile
            layout_sensors.extend((base_r + r, base_c + c) for r, c in doubled)
            candidates.extend((base_r + r, base_c + c) for r, c in interior)
    layout = TestbedLayout(
        grid_size=tile * repeats,
        pixel_size=pixel_size / 2.0,
        sensors=sorted(layout_sensors),
        candidate_cells=candidates
    )
    logger.info(
        f"Upsampled {len(sensors)} testbed sensors to {len(layout.sensors)} "
        f"({layout.sensor_density:.2%} density), {len(candidates)} candidate cells"
    )
    return layout


def tile_sensor_image(
    image: np.ndarray,
    tile_size: int = 100
) -> List[Tuple[Tuple[int, int], np.ndarray]]:
    """
    Split a large field into zero-padded ``tile_size`` tiles.

    Returns:
        ``((row_offset, col_offset), tile)`` pairs in row-major order
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ShapeMismatchError(f"expected a 2-D image, got shape {image.shape}")
    rows = int(np.ceil(image.shape[0] / tile_size)) * tile_size
    cols = int(np.ceil(image.shape[1] / tile_size)) * tile_size
    padded = np.zeros((rows, cols), dtype=np.float64)
    padded[:image.shape[0], :image.shape[1]] = image
    return [
        ((r, c), padded[r:r + tile_size, c:c + tile_size].copy())
        for r in range(0, rows, tile_size)
        for c in range(0, cols, tile_size)
    ]


def _sidecar(path: Path) -> Path:
    return path.with_suffix('.json')


def save_matrix(path: Path, matrix: np.ndarray) -> Path:
    """Write row-major float32 LE binary plus a JSON sidecar with the shape."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    array = np.ascontiguousarray(matrix, dtype=MATRIX_DTYPE)
    array.tofile(path)
    with open(_sidecar(path), 'w') as f:
        json.dump({'shape': list(array.shape), 'dtype': MATRIX_DTYPE, 'order': 'C'}, f)
    return path


def load_matrix(path: Path, expected_shape: Optional[Tuple[int, ...]] = None) -> np.ndarray:
    """Read a matrix written by :func:`save_matrix`."""
    path = Path(path)
    if not path.exists() or not _sidecar(path).exists():
        raise DatasetError(f"matrix file or sidecar missing: {path}")
    with open(_sidecar(path), 'r') as f:
        meta = json.load(f)
    shape = tuple(meta['shape'])
    data = np.fromfile(path, dtype=meta.get('dtype', MATRIX_DTYPE))
    if data.size != int(np.prod(shape)):
        raise ShapeMismatchError(f"{path} holds {data.size} values, sidecar declares {shape}")
    if expected_shape is not None and shape != tuple(expected_shape):
        raise ShapeMismatchError(f"{path} has shape {shape}, expected {tuple(expected_shape)}")
    return data.reshape(shape)
