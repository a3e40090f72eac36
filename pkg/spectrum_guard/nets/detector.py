"""
Single-scale, single-class box detector on 416x416 peak images.

A reduced conv/batch-norm/leaky-ReLU backbone downsamples by 8 to a 52x52
grid; a 1x1 head predicts ``(tx, ty, tw, th, objectness, class)`` for each of
three square anchors per cell.
"""

import math
from typing import ClassVar, Optional, Tuple

import torch
import torch.nn as nn

from spectrum_guard.models import (
    ActivationType,
    ArchitectureName,
    ConvSpec,
    DetectorHeadSpec,
    NormType,
)

from .base_net import BaseNet, conv_block

# objectness / class logits start near a 1% prior
PRIOR_PROBABILITY = 0.01


def dbl(in_channels: int, out_channels: int, kernel: int = 3, stride: int = 1) -> nn.Sequential:
    """conv + batch norm + leaky ReLU."""
    return conv_block(ConvSpec(
        in_channels=in_channels,
        out_channels=out_channels,
        kernel=kernel,
        stride=stride,
        padding=(kernel - 1) // 2,
        norm=NormType.BATCH,
        activation=ActivationType.LEAKY_RELU
    ))


class ResidualBlock(nn.Module):
    """1x1 squeeze then 3x3 expand, added back to the input."""

    def __init__(self, channels: int):
        super().__init__()
        self.squeeze = dbl(channels, channels // 2, kernel=1)
        self.expand = dbl(channels // 2, channels, kernel=3)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.expand(self.squeeze(x))


class Detector(BaseNet):
    """
    Reduced backbone feeding one 52x52 detection layer.

    ``forward`` returns the raw head as ``(B, grid, grid, anchors, 5 + classes)``
    where axis 1 follows image rows (the x coordinate).
    """

    architecture: ClassVar[ArchitectureName] = ArchitectureName.DETECTOR
    input_shape: ClassVar[Tuple[int, int, int]] = (3, 416, 416)

    def __init__(self, head: Optional[DetectorHeadSpec] = None, width: int = 16):
        super().__init__()
        self.head_spec = head or DetectorHeadSpec()
        if self.head_spec.input_size != self.head_spec.grid * 8:
            raise ValueError(
                f"backbone stride is 8; input {self.head_spec.input_size} does not give grid {self.head_spec.grid}"
            )
        self.input_shape = (3, self.head_spec.input_size, self.head_spec.input_size)
        self.backbone = nn.Sequential(
            dbl(3, width),
            dbl(width, 2 * width, stride=2),
            ResidualBlock(2 * width),
            dbl(2 * width, 4 * width, stride=2),
            ResidualBlock(4 * width),
            dbl(4 * width, 8 * width, stride=2),
            ResidualBlock(8 * width),
            dbl(8 * width, 4 * width, kernel=1),
            dbl(4 * width, 8 * width),
        )
        out_channels = self.head_spec.num_anchors * self.head_spec.values_per_anchor
        self.head = nn.Conv2d(8 * width, out_channels, kernel_size=1, stride=1, padding=0, bias=True)
        self._init_head_bias()

    def _init_head_bias(self) -> None:
        spec = self.head_spec
        prior = -math.log((1 - PRIOR_PROBABILITY) / PRIOR_PROBABILITY)
        with torch.no_grad():
            bias = self.head.bias.view(spec.num_anchors, spec.values_per_anchor)
            bias.zero_()
            bias[:, 4:] = prior

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        self.check_input(x)
        spec = self.head_spec
        out = self.head(self.backbone(x))
        batch = out.shape[0]
        out = out.view(batch, spec.num_anchors, spec.values_per_anchor, spec.grid, spec.grid)
        return out.permute(0, 3, 4, 1, 2).contiguous()
