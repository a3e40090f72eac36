"""
Random scene sampling following the experiment protocol: uniform sensor cells,
continuous intruder locations, uniform powers, spread-out authorized users.
"""

import hashlib
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from spectrum_guard.exceptions import ConfigError
from spectrum_guard.models import FieldConfig, Scene, Transmitter, TransmitterKind

logger = logging.getLogger(__name__)

# authorized users are kept this far apart only when there are few of them
SPREAD_OUT_LIMIT = 5
MAX_PLACEMENT_ATTEMPTS = 10_000

Cell = Tuple[int, int]


def _flat_to_cells(flat: np.ndarray, grid_size: int) -> List[Cell]:
    return [(int(v // grid_size), int(v % grid_size)) for v in flat]


def sample_sensors(
    config: FieldConfig,
    rng: np.random.Generator,
    exclude: Optional[Sequence[Cell]] = None
) -> List[Cell]:
    """Sensor cells drawn uniformly without replacement, avoiding ``exclude``."""
    count = config.num_sensors
    blocked = {int(r) * config.grid_size + int(c) for r, c in (exclude or [])}
    available = config.num_cells - len(blocked)
    if count > available:
        raise ConfigError(
            f"density {config.sensor_density} implies {count} sensors but only {available} cells are free"
        )
    pool = np.array([k for k in range(config.num_cells) if k not in blocked], dtype=np.int64)
    flat = rng.choice(pool, size=count, replace=False)
    return _flat_to_cells(np.sort(flat), config.grid_size)


def disjoint_sensor_split(
    config: FieldConfig,
    rng: np.random.Generator
) -> Tuple[List[Cell], List[Cell]]:
    """
    Two sensor layouts of the configured density sharing no cell.

    Raises:
        ConfigError: If twice the sensor count exceeds the number of cells
    """
    count = config.num_sensors
    if 2 * count > config.num_cells:
        raise ConfigError(
            f"cannot place two disjoint sets of {count} sensors in {config.num_cells} cells"
        )
    order = rng.permutation(config.num_cells)
    train = _flat_to_cells(np.sort(order[:count]), config.grid_size)
    test = _flat_to_cells(np.sort(order[count:2 * count]), config.grid_size)
    return train, test


def sensor_fingerprint(sensors: Sequence[Cell]) -> str:
    """Stable digest of a sensor layout."""
    digest = hashlib.sha256()
    for row, col in sorted((int(r), int(c)) for r, c in sensors):
        digest.update(f"{row},{col};".encode('ascii'))
    return digest.hexdigest()[:16]


def _sample_intruder_count(config: FieldConfig, rng: np.random.Generator) -> int:
    low, high = config.intruder_count_range
    if low == high:
        return low
    return int(rng.integers(low, high + 1))


def _sample_intruders(
    config: FieldConfig,
    count: int,
    rng: np.random.Generator,
    candidate_cells: Optional[Sequence[Cell]] = None
) -> List[Transmitter]:
    low, high = config.power_range
    if candidate_cells is not None:
        picks = rng.integers(0, len(candidate_cells), size=count)
        base = np.asarray(candidate_cells, dtype=np.float64)[picks]
        locations = base + rng.random((count, 2))
    else:
        locations = rng.random((count, 2)) * config.grid_size
    # rng.random is [0, 1) so locations stay strictly inside the field
    powers = rng.uniform(low, high, size=count)
    return [
        Transmitter(x=float(x), y=float(y), power=float(p), kind=TransmitterKind.INTRUDER)
        for (x, y), p in zip(locations, powers)
    ]


def _sample_authorized(config: FieldConfig, rng: np.random.Generator) -> List[Transmitter]:
    count = config.num_authorized
    if count == 0:
        return []
    low, high = config.effective_authorized_power_range
    enforce_spread = count <= SPREAD_OUT_LIMIT and config.authorized_min_separation > 0
    placed: List[np.ndarray] = []
    attempts = 0
    while len(placed) < count:
        attempts += 1
        if attempts > MAX_PLACEMENT_ATTEMPTS:
            raise ConfigError(
                f"could not place {count} authorized users {config.authorized_min_separation} px apart"
            )
        cell = rng.integers(0, config.grid_size, size=2)
        center = cell.astype(np.float64) + 0.5
        if enforce_spread and any(
            np.linalg.norm(center - other) < config.authorized_min_separation for other in placed
        ):
            continue
        if not enforce_spread and any(np.array_equal(center, other) for other in placed):
            continue
        placed.append(center)
    powers = rng.uniform(low, high, size=count)
    return [
        Transmitter(x=float(c[0]), y=float(c[1]), power=float(p), kind=TransmitterKind.AUTHORIZED)
        for c, p in zip(placed, powers)
    ]


def sample_scene(
    config: FieldConfig,
    rng: np.random.Generator,
    sensors: Optional[Sequence[Cell]] = None,
    candidate_cells: Optional[Sequence[Cell]] = None
) -> Scene:
    """
    Draw one random scene.

    Args:
        config: Field protocol
        rng: Owned random source
        sensors: Fixed sensor layout; sampled from ``rng`` when None
        candidate_cells: Restrict intruders to these cells (continuous inside each)

    Returns:
        Scene with intruders first, then authorized users
    """
    if sensors is None:
        sensors = sample_sensors(config, rng)
    count = _sample_intruder_count(config, rng)
    transmitters = _sample_intruders(config, count, rng, candidate_cells)
    transmitters.extend(_sample_authorized(config, rng))
    return Scene(config=config, sensors=[tuple(s) for s in sensors], transmitters=transmitters)
