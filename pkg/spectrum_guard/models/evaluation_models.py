"""
Strict models for matching results and evaluation reports.
"""

from typing import ClassVar, List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator


class MatchResult(BaseModel):
    """Thresholded greedy matching between ground truth and predictions.

    Distances are in grid pixels; ``pixel_size`` converts them to meters.
    """

    pairs: List[Tuple[int, int, float]] = Field(
        default_factory=list,
        description="(gt_idx, pred_idx, distance px)"
    )
    misses: List[int] = Field(default_factory=list, description="Unmatched ground-truth indices")
    false_alarms: List[int] = Field(default_factory=list, description="Unmatched prediction indices")
    threshold: float = Field(gt=0, description="Maximum eligible distance in pixels")
    pixel_size: float = Field(default=1.0, gt=0, description="Meters per pixel")

    @model_validator(mode='after')
    def _check_pairs(self):
        gt_seen = [p[0] for p in self.pairs]
        pred_seen = [p[1] for p in self.pairs]
        if len(set(gt_seen)) != len(gt_seen) or len(set(pred_seen)) != len(pred_seen):
            raise ValueError("an index appears in more than one pair")
        for _, _, distance in self.pairs:
            if distance > self.threshold:
                raise ValueError(f"pair distance {distance} exceeds threshold {self.threshold}")
        return self

    @property
    def total_cost(self) -> float:
        return float(sum(p[2] for p in self.pairs))


class Prediction(BaseModel):
    """Pipeline output for one sample."""

    locations: List[Tuple[float, float]] = Field(default_factory=list)
    powers: Optional[List[float]] = Field(default=None, description="dBm per location when estimated")
    raw_powers: Optional[List[float]] = Field(default=None, description="Uncorrected dBm per location")
    latency_s: float = Field(default=0.0, ge=0)


class SampleResult(BaseModel):
    """Per-sample evaluation dump used for CDF plots."""

    sample_id: str
    variant: str = Field(default="detector")
    sweep_value: Optional[float] = Field(default=None)
    num_gt: int = Field(ge=0)
    num_pred: int = Field(ge=0)
    misses: int = Field(ge=0)
    false_alarms: int = Field(ge=0)
    miss_rate: float = Field(ge=0, le=1)
    false_alarm_rate: float = Field(ge=0, le=1)
    localization_errors_m: List[float] = Field(default_factory=list)
    power_errors_db: List[float] = Field(default_factory=list)
    latency_s: float = Field(default=0.0, ge=0)


class EvalReport(BaseModel):
    """Aggregated metrics for one experiment cell."""

    variant: str = Field(default="detector")
    sweep_param: Optional[str] = Field(default=None)
    sweep_value: Optional[float] = Field(default=None)
    localization_error_m: Optional[float] = Field(
        default=None,
        description="Mean over all matched pairs; None when nothing matched"
    )
    miss_rate: float = Field(ge=0, le=1, description="Macro-averaged miss rate")
    false_alarm_rate: float = Field(ge=0, le=1, description="Macro-averaged false alarm rate")
    power_error_db: Optional[float] = Field(default=None)
    latency_s: float = Field(default=0.0, ge=0, description="Mean per-sample wall time")
    num_samples: int = Field(ge=0)

    CSV_COLUMNS: ClassVar[Tuple[str, ...]] = (
        'variant', 'sweep_param', 'sweep_value', 'L_err', 'M_r', 'F_r', 'P_err', 'latency_s', 'n'
    )

    def csv_row(self) -> Tuple:
        return (
            self.variant,
            self.sweep_param or "",
            "" if self.sweep_value is None else self.sweep_value,
            "" if self.localization_error_m is None else round(self.localization_error_m, 6),
            round(self.miss_rate, 6),
            round(self.false_alarm_rate, 6),
            "" if self.power_error_db is None else round(self.power_error_db, 6),
            round(self.latency_s, 6),
            self.num_samples,
        )


__all__ = ['MatchResult', 'Prediction', 'SampleResult', 'EvalReport']
