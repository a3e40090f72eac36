"""
Propagation configuration models.
"""

from pydantic import BaseModel, Field


class PathLossModel(BaseModel):
    """Log-distance path-loss parameters with log-normal shadowing."""

    name: str = Field(default="log_distance", description="Model identifier")
    alpha: float = Field(default=3.5, gt=0, description="Path-loss exponent")
    shadow_sigma: float = Field(
        default=1.0,
        ge=0,
        description="Standard deviation of shadowing in dB"
    )
    reference_distance: float = Field(
        default=1.0,
        gt=0,
        description="Distance clamp in meters; shorter distances use this value"
    )

    class Config:
        frozen = True


class RadioEnvironment(BaseModel):
    """Path-loss model plus the receiver noise floor and the grid scale."""

    model: PathLossModel = Field(default_factory=PathLossModel)
    noise_floor: float = Field(default=-80.0, lt=0, description="Noise floor in dBm")
    pixel_size: float = Field(default=10.0, gt=0, description="Meters per grid cell")

    class Config:
        frozen = True


__all__ = ['PathLossModel', 'RadioEnvironment']
