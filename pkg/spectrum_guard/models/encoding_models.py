"""
Models describing image encodings.
"""

from typing import List, Tuple

from pydantic import BaseModel, Field, field_validator


class PeakSpec(BaseModel):
    """Gaussian peak used to mark a transmitter in a label image."""

    amplitude: float = Field(default=10.0, gt=0, description="Peak height")
    sigma: float = Field(default=0.9, gt=0, description="Standard deviation in pixels")
    footprint: int = Field(default=5, gt=0, description="Side of the square window in pixels")

    @field_validator('footprint')
    @classmethod
    def _odd_footprint(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError(f"footprint side must be odd, got {value}")
        return value

    @property
    def half_width(self) -> int:
        return self.footprint // 2

    class Config:
        frozen = True


class TestbedLayout(BaseModel):
    """A 100x100 layout derived from a small testbed grid."""

    __test__ = False

    grid_size: int = Field(description="Cells per side of the upsampled layout")
    pixel_size: float = Field(description="Meters per upsampled cell")
    sensors: List[Tuple[int, int]] = Field(description="Sensor cells in the upsampled layout")
    candidate_cells: List[Tuple[int, int]] = Field(
        description="Cells where transmitters may be placed"
    )

    @property
    def sensor_density(self) -> float:
        return len(self.sensors) / float(self.grid_size * self.grid_size)


__all__ = ['PeakSpec', 'TestbedLayout']
