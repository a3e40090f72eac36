"""
On-disk dataset manifest models.
"""

from datetime import datetime
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from spectrum_guard.models.propagation_models import RadioEnvironment
from spectrum_guard.models.scene_models import FieldConfig, Scene

MANIFEST_VERSION = 1


class SampleRecord(BaseModel):
    """Relative paths of the files making up one sample."""

    sample_id: str
    scene: str = Field(description="Scene JSON (transmitters, config)")
    readings: str = Field(description="dBm reading matrix, float32 LE")
    label: str = Field(description="Peak label image, float32 LE")
    intruder_readings: Optional[str] = Field(
        default=None,
        description="Readings due to intruders only (present when authorized users exist)"
    )
    num_intruders: int = Field(ge=0)


class DatasetManifest(BaseModel):
    """Index of a generated dataset; written last as the completion marker."""

    version: int = Field(default=MANIFEST_VERSION)
    name: str = Field(default="dataset")
    field: FieldConfig
    propagation: RadioEnvironment
    sample_count: int = Field(ge=0)
    samples: List[SampleRecord] = Field(default_factory=list)
    seed: int
    sensors: List[Tuple[int, int]] = Field(description="Sensor layout shared by every sample")
    sensor_fingerprint: str
    sweep_param: Optional[str] = Field(default=None)
    sweep_value: Optional[float] = Field(default=None)
    candidate_cells: Optional[List[Tuple[int, int]]] = Field(
        default=None,
        description="Restricted transmitter cells (testbed layouts)"
    )
    created_at: datetime = Field(default_factory=datetime.now)


class LoadedSample(BaseModel):
    """One sample read back from disk."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    sample_id: str
    scene: Scene
    readings: np.ndarray = Field(description="dBm reading per sensor, in scene sensor order")
    label: Optional[np.ndarray] = Field(default=None, description="Peak label image")
    intruder_readings: Optional[np.ndarray] = Field(default=None)
    sweep_value: Optional[float] = Field(default=None)


__all__ = ['MANIFEST_VERSION', 'SampleRecord', 'DatasetManifest', 'LoadedSample']
