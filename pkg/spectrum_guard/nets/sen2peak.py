"""
Sensor-image to peak-image translation network.
"""

from typing import ClassVar, Tuple

from spectrum_guard.models import ArchitectureName, NormType

from .base_net import ConvStackNet, plan

SEN2PEAK_CHANNELS = (1, 16, 32, 16, 1)


class Sen2Peak(ConvStackNet):
    """
    Four 5x5 convolutions, no down-sampling, 17x17 receptive field.

    Group norm and ReLU follow the first three layers; the last is linear.
    """

    architecture: ClassVar[ArchitectureName] = ArchitectureName.SEN2PEAK
    input_shape: ClassVar[Tuple[int, int, int]] = (1, 100, 100)

    def __init__(self, grid_size: int = 100):
        super().__init__(plan(SEN2PEAK_CHANNELS, kernel=5, stride=1, padding=2, norm=NormType.GROUP))
        self.input_shape = (1, grid_size, grid_size)
