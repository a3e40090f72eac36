"""
Detection output models.
"""

from typing import Optional, Tuple

from pydantic import BaseModel, Field, model_validator


class DetectionBox(BaseModel):
    """Axis-aligned box in field pixels; its center is the transmitter estimate."""

    cx: float = Field(ge=0, description="Center row coordinate")
    cy: float = Field(ge=0, description="Center column coordinate")
    w: float = Field(ge=0, description="Extent along rows")
    h: float = Field(ge=0, description="Extent along columns")
    confidence: float = Field(ge=0, le=1)
    field_size: Optional[float] = Field(default=None, gt=0, description="Side of the field the center must lie in")

    @model_validator(mode='after')
    def _check_center(self):
        if self.field_size is not None and (self.cx >= self.field_size or self.cy >= self.field_size):
            raise ValueError(f"center ({self.cx}, {self.cy}) outside a {self.field_size} px field")
        return self

    @property
    def center(self) -> Tuple[float, float]:
        return (self.cx, self.cy)

    class Config:
        frozen = True


class DetectorThresholds(BaseModel):
    """Confidence and NMS IoU thresholds."""

    conf: float = Field(default=0.8, ge=0, le=1)
    nms: float = Field(default=0.5, ge=0, le=1)


__all__ = ['DetectionBox', 'DetectorThresholds']
