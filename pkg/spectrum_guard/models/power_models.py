"""
Power estimation models: isolation rule and the linear correction model.
"""

import json
from enum import Enum
from pathlib import Path
from typing import List, Tuple

from pydantic import BaseModel, Field, model_validator


class RegressorType(str, Enum):
    RIDGE = "ridge"
    LINEAR = "linear"
    LASSO = "lasso"


class IsolationRule(BaseModel):
    """Distances (pixels) deciding isolation and neighborhood."""

    isolation_radius: float = Field(default=20.0, gt=0)
    neighbor_radius: float = Field(default=20.0, gt=0)


class CorrectionRecord(BaseModel):
    """One training example for the correction model."""

    subject_power: float = Field(description="Uncorrected estimate p' of the subject")
    neighbors: List[Tuple[float, float]] = Field(
        default_factory=list,
        description="(distance px, uncorrected power) of close-by estimates"
    )
    delta: float = Field(description="p' minus the true power")


class CorrectionModel(BaseModel):
    """Linear model of the overestimation delta."""

    theta: List[float] = Field(description="Coefficients, length 1 + 3M")
    max_neighbors: int = Field(
        alias="M",
        ge=0,
        description="Neighbor slots in the feature vector"
    )
    alpha: float = Field(default=0.01, ge=0, description="Regularization strength")
    neighbor_radius: float = Field(default=20.0, gt=0)
    regressor: RegressorType = Field(default=RegressorType.RIDGE)

    class Config:
        populate_by_name = True

    @model_validator(mode='after')
    def _check_length(self):
        expected = 1 + 3 * self.max_neighbors
        if len(self.theta) != expected:
            raise ValueError(f"theta has {len(self.theta)} terms, expected {expected}")
        return self

    @property
    def num_features(self) -> int:
        return 1 + 3 * self.max_neighbors

    @classmethod
    def zeros(cls, max_neighbors: int, **kwargs) -> 'CorrectionModel':
        return cls(theta=[0.0] * (1 + 3 * max_neighbors), max_neighbors=max_neighbors, **kwargs)

    def save(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.model_dump(mode='json', by_alias=True), f, indent=2)
        return path

    @classmethod
    def load(cls, path: Path) -> 'CorrectionModel':
        with open(path, 'r', encoding='utf-8') as f:
            return cls(**json.load(f))


__all__ = ['RegressorType', 'IsolationRule', 'CorrectionRecord', 'CorrectionModel']
