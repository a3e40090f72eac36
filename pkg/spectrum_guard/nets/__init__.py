"""
Torch network definitions.
"""

from typing import Optional

import torch

from spectrum_guard.models import ArchitectureName

from .base_net import BaseNet, ConvStackNet, conv_block, plan, receptive_field
from .detector import Detector, ResidualBlock
from .predpower import PredPower
from .sen2peak import Sen2Peak
from .subtractnet import SubtractNet

NETS = {
    ArchitectureName.SEN2PEAK: Sen2Peak,
    ArchitectureName.DETECTOR: Detector,
    ArchitectureName.SUBTRACTNET: SubtractNet,
    ArchitectureName.PREDPOWER: PredPower,
}


def build_net(
    architecture: ArchitectureName,
    seed: Optional[int] = None,
    grid_size: int = 100
) -> BaseNet:
    """Instantiate an architecture, seeding weight init when ``seed`` is given."""
    architecture = ArchitectureName(architecture)
    if seed is not None:
        torch.manual_seed(seed)
    if architecture in (ArchitectureName.SEN2PEAK, ArchitectureName.SUBTRACTNET):
        return NETS[architecture](grid_size=grid_size)
    return NETS[architecture]()


__all__ = [
    'BaseNet',
    'ConvStackNet',
    'conv_block',
    'plan',
    'receptive_field',
    'Sen2Peak',
    'SubtractNet',
    'PredPower',
    'Detector',
    'ResidualBlock',
    'NETS',
    'build_net',
]
