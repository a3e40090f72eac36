"""
Base class for every network in the toolkit.

Networks are built from ``ConvSpec`` layer plans so the same plan drives the
module construction, the spatial shape checks and the receptive-field
computation.
"""

from abc import ABC, abstractmethod
from collections import OrderedDict
from typing import ClassVar, List, Sequence, Tuple
import logging

import torch
import torch.nn as nn

from spectrum_guard.exceptions import ShapeMismatchError
from spectrum_guard.models import ActivationType, ArchitectureName, ConvSpec, NormType

logger = logging.getLogger(__name__)


def conv_block(spec: ConvSpec) -> nn.Sequential:
    """conv, then optional norm and activation, as named submodules."""
    layers = [(
        "conv",
        nn.Conv2d(
            spec.in_channels,
            spec.out_channels,
            kernel_size=spec.kernel,
            stride=spec.stride,
            padding=spec.padding,
            bias=spec.norm == NormType.NONE
        )
    )]
    if spec.norm == NormType.GROUP:
        layers.append(("norm", nn.GroupNorm(spec.num_groups, spec.out_channels)))
    elif spec.norm == NormType.BATCH:
        layers.append(("norm", nn.BatchNorm2d(spec.out_channels)))
    if spec.activation == ActivationType.RELU:
        layers.append(("act", nn.ReLU(inplace=True)))
    elif spec.activation == ActivationType.LEAKY_RELU:
        layers.append(("act", nn.LeakyReLU(0.1, inplace=True)))
    return nn.Sequential(OrderedDict(layers))


def receptive_field(specs: Sequence[ConvSpec]) -> Tuple[int, int]:
    """
    Composed (receptive field side, total stride) of a conv stack.

    Each layer grows the field by ``(kernel - 1) * accumulated stride``.
    """
    field, stride = 1, 1
    for spec in specs:
        field += (spec.kernel - 1) * stride
        stride *= spec.stride
    return field, stride


def plan(channels: Sequence[int], last_linear: bool = True, **kwargs) -> List[ConvSpec]:
    """ConvSpecs for a channel plan such as ``[1, 16, 32, 16, 1]``."""
    specs = []
    for idx, (c_in, c_out) in enumerate(zip(channels[:-1], channels[1:])):
        last = idx == len(channels) - 2
        if last and last_linear:
            specs.append(ConvSpec(
                in_channels=c_in,
                out_channels=c_out,
                norm=NormType.NONE,
                activation=ActivationType.NONE,
                **{k: v for k, v in kwargs.items() if k not in ('norm', 'activation', 'groups')}
            ))
        else:
            specs.append(ConvSpec(in_channels=c_in, out_channels=c_out, **kwargs))
    return specs


class BaseNet(nn.Module, ABC):
    """
    Shared shape checking and bookkeeping for all architectures.

    Subclasses set ``architecture`` and ``input_shape`` (C, H, W) and
    implement ``forward``.
    """

    architecture: ClassVar[ArchitectureName]
    input_shape: ClassVar[Tuple[int, int, int]]

    def check_input(self, x: torch.Tensor) -> None:
        """
        Raises:
            ShapeMismatchError: If ``x`` is not ``(B, *input_shape)``
        """
        if x.dim() != 4 or tuple(x.shape[1:]) != tuple(self.input_shape):
            raise ShapeMismatchError(
                f"{self.architecture.value} expects (B, {', '.join(map(str, self.input_shape))}) "
                f"input, got {tuple(x.shape)}"
            )

    def num_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())

    @property
    def device(self) -> torch.device:
        return next(self.parameters()).device

    @abstractmethod
    def forward(self, x: torch.Tensor) -> torch.Tensor:
        pass


class ConvStackNet(BaseNet):
    """A plain sequential stack of conv blocks."""

    def __init__(self, specs: Sequence[ConvSpec]):
        super().__init__()
        self.specs = list(specs)
        self.layers = nn.Sequential(*[conv_block(spec) for spec in self.specs])

    @property
    def receptive_field(self) -> int:
        return receptive_field(self.specs)[0]

    def output_size(self, size: int) -> int:
        for spec in self.specs:
            size = spec.output_size(size)
        return size

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        self.check_input(x)
        return self.layers(x)
