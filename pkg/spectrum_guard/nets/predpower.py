"""
Transmit power regression from a crop centered on one transmitter.
"""

from typing import ClassVar, Tuple

import torch

from spectrum_guard.models import ArchitectureName, NormType

from .base_net import ConvStackNet, plan

PREDPOWER_CHANNELS = (1, 16, 32, 32, 16, 1)
PATCH_SIZE = 21


class PredPower(ConvStackNet):
    """
    Five unpadded 5x5 convolutions shrinking 21 -> 17 -> 13 -> 9 -> 5 -> 1.

    Batch norm and ReLU follow the first four layers. The 1x1x1 output is
    flattened to one dBm value per patch.
    """

    architecture: ClassVar[ArchitectureName] = ArchitectureName.PREDPOWER
    input_shape: ClassVar[Tuple[int, int, int]] = (1, PATCH_SIZE, PATCH_SIZE)

    def __init__(self):
        super().__init__(plan(PREDPOWER_CHANNELS, kernel=5, stride=1, padding=0, norm=NormType.BATCH))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return super().forward(x).flatten(1).squeeze(1)
