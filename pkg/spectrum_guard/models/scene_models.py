"""
Field, transmitter and scene models.

Coordinates are continuous grid units: cell ``(i, j)`` covers
``[i, i+1) x [j, j+1)`` and its center is ``(i + 0.5, j + 0.5)``. The first
coordinate indexes image rows.
"""

from enum import Enum
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator


class TransmitterKind(str, Enum):
    """Role of a transmitter in the field."""
    INTRUDER = "intruder"
    AUTHORIZED = "authorized"


class FieldConfig(BaseModel):
    """Monitored field geometry and the random scene protocol."""

    grid_size: int = Field(default=100, gt=0, description="Cells per side")
    pixel_size: float = Field(default=10.0, gt=0, description="Meters per cell")
    sensor_density: float = Field(
        default=0.06,
        gt=0,
        le=1,
        description="Fraction of cells holding a sensor"
    )
    num_intruders: Union[int, Tuple[int, int]] = Field(
        default=5,
        description="Fixed intruder count or inclusive (min, max) range"
    )
    power_range: Tuple[float, float] = Field(
        default=(0.0, 5.0),
        description="Intruder transmit power range in dBm"
    )
    num_authorized: int = Field(default=0, ge=0, description="Authorized users per scene")
    authorized_power_range: Optional[Tuple[float, float]] = Field(
        default=None,
        description="Authorized user power range in dBm; defaults to power_range"
    )
    authorized_min_separation: float = Field(
        default=40.0,
        ge=0,
        description="Minimum pairwise distance (pixels) between authorized users"
    )

    @field_validator('num_intruders')
    @classmethod
    def _check_intruders(cls, value):
        if isinstance(value, int):
            if value < 0:
                raise ValueError("num_intruders must be >= 0")
        else:
            low, high = value
            if low < 0 or low > high:
                raise ValueError(f"invalid num_intruders range {value}")
        return value

    @model_validator(mode='after')
    def _check_power_ranges(self):
        if self.power_range[0] > self.power_range[1]:
            raise ValueError(f"power_range min exceeds max: {self.power_range}")
        if self.authorized_power_range is not None:
            low, high = self.authorized_power_range
            if low > high:
                raise ValueError(f"authorized_power_range min exceeds max: {self.authorized_power_range}")
        return self

    @property
    def num_cells(self) -> int:
        return self.grid_size * self.grid_size

    @property
    def num_sensors(self) -> int:
        return int(round(self.sensor_density * self.num_cells))

    @property
    def intruder_count_range(self) -> Tuple[int, int]:
        if isinstance(self.num_intruders, int):
            return self.num_intruders, self.num_intruders
        return tuple(self.num_intruders)

    @property
    def effective_authorized_power_range(self) -> Tuple[float, float]:
        return self.authorized_power_range or self.power_range


class Transmitter(BaseModel):
    """A transmitter at a continuous location."""

    x: float = Field(ge=0, description="Row coordinate in grid units")
    y: float = Field(ge=0, description="Column coordinate in grid units")
    power: float = Field(description="Transmit power in dBm")
    kind: TransmitterKind = Field(default=TransmitterKind.INTRUDER)

    @property
    def location(self) -> Tuple[float, float]:
        return (self.x, self.y)

    @property
    def cell(self) -> Tuple[int, int]:
        return (int(np.floor(self.x)), int(np.floor(self.y)))


class Scene(BaseModel):
    """One field instance: sensor cells plus placed transmitters."""

    config: FieldConfig = Field(default_factory=FieldConfig)
    sensors: List[Tuple[int, int]] = Field(
        default_factory=list,
        description="Sensor cells (row, col); sensors sit at cell centers"
    )
    transmitters: List[Transmitter] = Field(default_factory=list)

    @model_validator(mode='after')
    def _check_scene(self):
        if len(set(self.sensors)) != len(self.sensors):
            raise ValueError("sensor cells must be unique")
        size = self.config.grid_size
        for tx in self.transmitters:
            if tx.x >= size or tx.y >= size:
                raise ValueError(f"transmitter ({tx.x}, {tx.y}) outside {size}x{size} field")
        return self

    @property
    def intruders(self) -> List[Transmitter]:
        return [t for t in self.transmitters if t.kind == TransmitterKind.INTRUDER]

    @property
    def authorized(self) -> List[Transmitter]:
        return [t for t in self.transmitters if t.kind == TransmitterKind.AUTHORIZED]

    def sensor_array(self) -> np.ndarray:
        """Sensor cells as an ``(n, 2)`` int array."""
        if not self.sensors:
            return np.zeros((0, 2), dtype=np.int64)
        return np.asarray(self.sensors, dtype=np.int64)

    def sensor_centers(self) -> np.ndarray:
        """Sensor positions (cell centers) as an ``(n, 2)`` float array."""
        return self.sensor_array().astype(np.float64) + 0.5


__all__ = ['TransmitterKind', 'FieldConfig', 'Transmitter', 'Scene']
