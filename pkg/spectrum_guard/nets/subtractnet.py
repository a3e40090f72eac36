"""
Authorized-user subtraction network.

Input channel 0 holds the normalized readings, channel 1 the authorized-user
peaks; the output approximates the readings due to intruders alone.
"""

from typing import ClassVar, Tuple

from spectrum_guard.models import ArchitectureName, NormType

from .base_net import ConvStackNet, plan

SUBTRACTNET_CHANNELS = (2, 16, 32, 64, 64, 32, 16, 8, 1)


class SubtractNet(ConvStackNet):
    """Eight 5x5 convolutions with a 33x33 receptive field."""

    architecture: ClassVar[ArchitectureName] = ArchitectureName.SUBTRACTNET
    input_shape: ClassVar[Tuple[int, int, int]] = (2, 100, 100)

    def __init__(self, grid_size: int = 100):
        super().__init__(plan(SUBTRACTNET_CHANNELS, kernel=5, stride=1, padding=2, norm=NormType.GROUP))
        self.input_shape = (2, grid_size, grid_size)
