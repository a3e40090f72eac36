from pydantic import BaseModel, Field, ValidationError
from pathlib import Path
import json
from typing import Dict, List, Optional

from spectrum_guard.exceptions import ConfigError
from spectrum_guard.models import (
    ArchitectureName, DetectorThresholds, FieldConfig, IsolationRule,
    PeakSpec, RadioEnvironment, TrainConfig
)

DEFAULT_CONFIG_PATH = Path(__file__).parent / "experiment_config.json"


class SweepConfig(BaseModel):
    num_tx: List[int] = Field(default_factory=lambda: list(range(1, 11)))
    density: List[float] = Field(
        default_factory=lambda: [round(0.01 * i, 2) for i in range(1, 11)]
    )


class ExperimentConfig(BaseModel):
    field: FieldConfig = Field(default_factory=FieldConfig)
    propagation: RadioEnvironment = Field(default_factory=RadioEnvironment)
    peak: PeakSpec = Field(default_factory=PeakSpec)
    train: Dict[ArchitectureName, TrainConfig] = Field(default_factory=dict)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    thresholds: DetectorThresholds = Field(default_factory=DetectorThresholds)
    isolation: IsolationRule = Field(default_factory=IsolationRule)
    threshold_px: float = Field(default=5.0, gt=0, description="Matching eligibility threshold")
    correction_alpha: float = Field(default=0.01, ge=0)
    num_train_samples: int = Field(default=10_000, ge=1)
    num_test_samples: int = Field(default=2_000, ge=1)
    output_dir: str = Field(default="outputs")
    seed: int = Field(default=0)
    workers: int = Field(default=4, ge=1)

    @classmethod
    def from_json(cls, json_path: Optional[Path] = None) -> 'ExperimentConfig':
        json_path = Path(json_path) if json_path else DEFAULT_CONFIG_PATH
        if not json_path.exists():
            raise ConfigError(f"config file not found: {json_path}")
        with open(json_path, 'r') as f:
            data = json.load(f)
        try:
            return cls(**data)
        except ValidationError as e:
            raise ConfigError(f"invalid config {json_path}: {e}") from e

    def train_config(self, architecture: ArchitectureName) -> TrainConfig:
        return self.train.get(ArchitectureName(architecture), TrainConfig(seed=self.seed))

    def with_overrides(self, **overrides) -> 'ExperimentConfig':
        """Apply non-None overrides (CLI flags win over file values)."""
        updates = {k: v for k, v in overrides.items() if v is not None}
        if not updates:
            return self
        try:
            return ExperimentConfig(**{**self.model_dump(), **updates})
        except ValidationError as e:
            raise ConfigError(f"invalid override: {e}") from e
