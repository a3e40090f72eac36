"""
Network layer specs, training configuration and checkpoint metadata.
"""

from datetime import datetime
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator


class NormType(str, Enum):
    GROUP = "group"
    BATCH = "batch"
    NONE = "none"


class ActivationType(str, Enum):
    RELU = "relu"
    LEAKY_RELU = "leaky_relu"
    NONE = "none"


class ArchitectureName(str, Enum):
    """Architectures that can be trained and checkpointed."""
    SEN2PEAK = "sen2peak"
    DETECTOR = "detector"
    SUBTRACTNET = "subtractnet"
    PREDPOWER = "predpower"


class ConvSpec(BaseModel):
    """One convolution layer with optional normalization and activation."""

    in_channels: int = Field(gt=0)
    out_channels: int = Field(gt=0)
    kernel: int = Field(default=5, gt=0)
    stride: int = Field(default=1, gt=0)
    padding: int = Field(default=2, ge=0)
    norm: NormType = Field(default=NormType.GROUP)
    groups: Optional[int] = Field(
        default=None,
        description="Group count for group norm; defaults to min(8, out_channels)"
    )
    activation: ActivationType = Field(default=ActivationType.RELU)

    @model_validator(mode='after')
    def _check(self):
        if self.kernel % 2 == 0:
            raise ValueError(f"kernel must be odd, got {self.kernel}")
        if self.norm == NormType.GROUP and self.out_channels % self.num_groups != 0:
            raise ValueError(f"{self.out_channels} channels not divisible into {self.num_groups} groups")
        return self

    @property
    def num_groups(self) -> int:
        return self.groups if self.groups is not None else min(8, self.out_channels)

    def output_size(self, size: int) -> int:
        """Spatial size produced from an input of side ``size``."""
        return (size + 2 * self.padding - self.kernel) // self.stride + 1


class TrainConfig(BaseModel):
    """Optimizer settings shared by every trainable architecture."""

    optimizer: str = Field(default="adam", description="Only adam is supported")
    learning_rate: float = Field(default=0.001, gt=0)
    epochs: int = Field(default=20, ge=1)
    batch_size: int = Field(default=32, ge=1)
    seed: int = Field(default=0)
    device: Optional[str] = Field(
        default=None,
        description="torch device; cuda when available if unset"
    )

    @model_validator(mode='after')
    def _check_optimizer(self):
        if self.optimizer.lower() != "adam":
            raise ValueError(f"unsupported optimizer {self.optimizer!r}")
        return self


class DetectorHeadSpec(BaseModel):
    """Single-scale detection head layout."""

    input_size: int = Field(default=416, description="Detector input side in pixels")
    grid: int = Field(default=52, description="Cells per side of the head")
    anchors: List[Tuple[float, float]] = Field(
        default_factory=lambda: [(15.0, 15.0), (25.0, 25.0), (35.0, 35.0)],
        description="Anchor (w, h) in input-space pixels"
    )
    num_classes: int = Field(default=1)

    @property
    def stride(self) -> int:
        return self.input_size // self.grid

    @property
    def num_anchors(self) -> int:
        return len(self.anchors)

    @property
    def values_per_anchor(self) -> int:
        return 5 + self.num_classes

    @property
    def num_boxes(self) -> int:
        return self.grid * self.grid * self.num_anchors

    class Config:
        frozen = True


class TrainingResult(BaseModel):
    """Outcome of one training run."""

    architecture: ArchitectureName
    train_losses: List[float] = Field(default_factory=list, description="Mean training loss per epoch")
    val_losses: List[float] = Field(default_factory=list, description="Validation loss per epoch")
    best_epoch: int = Field(default=0)
    best_val_loss: Optional[float] = Field(default=None)
    checkpoint_path: Optional[str] = Field(default=None)


class CheckpointMetadata(BaseModel):
    """JSON sidecar written next to every checkpoint."""

    architecture: ArchitectureName
    config_hash: str = Field(description="sha256 of the TrainConfig JSON")
    train_config: TrainConfig
    epoch: int = Field(ge=0)
    val_loss: Optional[float] = Field(default=None)
    dataset_fingerprint: Optional[str] = Field(
        default=None,
        description="Sensor-layout fingerprint of the training dataset"
    )
    grid_size: int = Field(default=100)
    extra: Dict[str, str] = Field(default_factory=dict)
    created_at: datetime = Field(default_factory=datetime.now)


__all__ = [
    'NormType',
    'ActivationType',
    'ArchitectureName',
    'ConvSpec',
    'TrainConfig',
    'DetectorHeadSpec',
    'TrainingResult',
    'CheckpointMetadata',
]
