"""
Run tracking models for experiment observability.
"""
from datetime import datetime
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from spectrum_guard.models.evaluation_models import EvalReport


class StageMetrics(BaseModel):
    """Timing for a named stage of a command."""
    name: str = Field(description="Stage name, e.g. 'generate', 'train:sen2peak', 'eval'")
    duration_seconds: float = Field(ge=0)
    items: int = Field(default=0, description="Samples, epochs or records processed")
    error: Optional[str] = Field(default=None)
    success: bool = Field(default=True)


class RunMetrics(BaseModel):
    """Everything recorded about one CLI run."""
    run_id: str = Field(description="Unique run identifier (timestamp-based)")
    command: str = Field(description="CLI subcommand")
    run_timestamp: datetime = Field(default_factory=datetime.now)
    seed: Optional[int] = Field(default=None)
    arguments: Dict[str, Any] = Field(default_factory=dict)

    stages: List[StageMetrics] = Field(default_factory=list)
    reports: List[EvalReport] = Field(default_factory=list)

    total_duration_seconds: float = Field(default=0.0)
    success: bool = Field(default=True)
    error: Optional[str] = Field(default=None)

    index_name: str = Field(default="spectrum-guard")
    indexed_at: Optional[datetime] = Field(default=None)


__all__ = ['StageMetrics', 'RunMetrics']
