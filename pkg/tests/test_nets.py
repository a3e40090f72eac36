"""
Tests for the network definitions: layer plans, shapes, receptive fields and
the detector head layout.
"""

import math
import sys
from pathlib import Path

import pytest
import torch
import torch.nn as nn

sys.path.insert(0, str(Path(__file__).parent.parent))

from spectrum_guard.exceptions import ShapeMismatchError
from spectrum_guard.models import ArchitectureName, ConvSpec, NormType
from spectrum_guard.nets import (
    Detector,
    PredPower,
    Sen2Peak,
    SubtractNet,
    build_net,
    plan,
    receptive_field,
)


class TestLayerPlans:
    """Tests for plan construction and receptive-field arithmetic."""

    def test_last_layer_linear(self):
        """Test the last planned layer has no norm or activation."""
        specs = plan((1, 16, 32, 16, 1), kernel=5, padding=2)
        assert [s.out_channels for s in specs] == [16, 32, 16, 1]
        assert specs[-1].norm == NormType.NONE
        assert specs[0].norm == NormType.GROUP

    def test_receptive_field(self):
        """Test four stride-1 5x5 layers see a 17x17 window."""
        assert receptive_field(plan((1, 16, 32, 16, 1), kernel=5, padding=2)) == (17, 1)

    def test_strided_receptive_field(self):
        """Test strides compound into the field and the total stride."""
        specs = [
            ConvSpec(in_channels=1, out_channels=8, kernel=3, stride=2, padding=1),
            ConvSpec(in_channels=8, out_channels=8, kernel=3, stride=2, padding=1),
        ]
        assert receptive_field(specs) == (7, 4)

    def test_group_norm_divisibility(self):
        """Test a channel count not divisible into groups is rejected."""
        with pytest.raises(ValueError):
            ConvSpec(in_channels=1, out_channels=12, groups=8)


class TestSen2Peak:
    """Tests for the translation network."""

    def test_shape_preserved(self):
        """Test a 100x100 input gives a 100x100 output."""
        net = Sen2Peak()
        assert net(torch.zeros(2, 1, 100, 100)).shape == (2, 1, 100, 100)
        assert net.receptive_field == 17

    def test_rejects_wrong_shape(self):
        """Test a mis-sized input raises ShapeMismatchError."""
        with pytest.raises(ShapeMismatchError):
            Sen2Peak()(torch.zeros(1, 1, 50, 50))

    def test_locality(self):
        """Test an output pixel of the conv stack ignores inputs beyond Chebyshev radius 8."""
        torch.manual_seed(0)
        net = Sen2Peak().eval()
        # group norm pools over the whole map
        for block in net.layers:
            if hasattr(block, "norm"):
                block.norm = nn.Identity()
        x = torch.rand(1, 1, 100, 100)
        baseline = net(x)[0, 0, 50, 50]
        far = x.clone()
        far[0, 0, :, 59:] = torch.rand(100, 41)
        far[0, 0, :41, :] = torch.rand(41, 100)
        assert torch.allclose(net(far)[0, 0, 50, 50], baseline, atol=1e-5)
        near = x.clone()
        near[0, 0, 58, 58] += 5.0
        assert not torch.allclose(net(near)[0, 0, 50, 50], baseline, atol=1e-6)

    def test_grid_size(self):
        """Test other grid sizes are accepted when configured."""
        assert Sen2Peak(grid_size=40)(torch.zeros(1, 1, 40, 40)).shape == (1, 1, 40, 40)


class TestSubtractNet:
    """Tests for the authorized-user subtraction network."""

    def test_two_channels_in_one_out(self):
        """Test SubtractNet maps (2, 100, 100) to (1, 100, 100)."""
        net = SubtractNet()
        assert net(torch.zeros(1, 2, 100, 100)).shape == (1, 1, 100, 100)
        assert [s.out_channels for s in net.specs] == [16, 32, 64, 64, 32, 16, 8, 1]

    def test_rejects_single_channel(self):
        """Test a one-channel input raises ShapeMismatchError."""
        with pytest.raises(ShapeMismatchError):
            SubtractNet()(torch.zeros(1, 1, 100, 100))

    def test_locality(self):
        """Test an output pixel ignores inputs of either channel beyond Chebyshev radius 16."""
        torch.manual_seed(0)
        net = SubtractNet().eval()
        assert net.receptive_field == 33
        for block in net.layers:
            if hasattr(block, "norm"):
                block.norm = nn.Identity()
        x = torch.rand(1, 2, 100, 100)
        baseline = net(x)[0, 0, 50, 50]
        far = x.clone()
        far[0, :, :, 67:] = torch.rand(2, 100, 33)
        far[0, :, :34, :] = torch.rand(2, 34, 100)
        assert torch.allclose(net(far)[0, 0, 50, 50], baseline, atol=1e-5)
        for channel in (0, 1):
            near = x.clone()
            near[0, channel, 66, 66] += 5.0
            assert not torch.allclose(net(near)[0, 0, 50, 50], baseline, atol=1e-6)


class TestPredPower:
    """Tests for the power regression network."""

    def test_spatial_plan(self):
        """Test the unpadded stack shrinks 21 -> 17 -> 13 -> 9 -> 5 -> 1."""
        net = PredPower()
        sizes = [21]
        for spec in net.specs:
            sizes.append(spec.output_size(sizes[-1]))
        assert sizes == [21, 17, 13, 9, 5, 1]
        x = torch.zeros(3, 1, 21, 21)
        for block, expected in zip(net.layers, sizes[1:]):
            x = block(x)
            assert x.shape[-1] == expected

    def test_scalar_per_patch(self):
        """Test the output is one value per patch."""
        net = PredPower().eval()
        assert net(torch.zeros(4, 1, 21, 21)).shape == (4,)

    def test_output_sees_whole_patch(self):
        """Test every pixel of the 21x21 crop influences the predicted power."""
        torch.manual_seed(0)
        net = PredPower().eval()
        assert net.receptive_field == 21
        x = torch.rand(8, 1, 21, 21, requires_grad=True)
        net(x).sum().backward()
        influence = x.grad.abs().sum(dim=0)[0]
        assert influence.shape == (21, 21)
        assert bool((influence > 0).all())


class TestDetector:
    """Tests for the single-scale detector."""

    def test_head_shape(self):
        """Test the raw head is (B, 52, 52, 3, 6)."""
        net = Detector().eval()
        with torch.no_grad():
            assert net(torch.zeros(1, 3, 416, 416)).shape == (1, 52, 52, 3, 6)

    def test_head_prior(self):
        """Test objectness and class logits start at the 1% prior."""
        net = Detector()
        bias = net.head.bias.view(3, 6)
        prior = -math.log(99.0)
        assert torch.allclose(bias[:, 4:], torch.full((3, 2), prior))
        assert torch.all(bias[:, :4] == 0)

    def test_rejects_wrong_input(self):
        """Test a 100x100 input raises ShapeMismatchError."""
        with pytest.raises(ShapeMismatchError):
            Detector()(torch.zeros(1, 3, 100, 100))


class TestBuildNet:
    """Tests for the architecture registry."""

    @pytest.mark.parametrize("name,cls", [
        (ArchitectureName.SEN2PEAK, Sen2Peak),
        (ArchitectureName.SUBTRACTNET, SubtractNet),
        (ArchitectureName.PREDPOWER, PredPower),
        (ArchitectureName.DETECTOR, Detector),
    ])
    def test_registry(self, name, cls):
        """Test names resolve to their classes."""
        assert isinstance(build_net(name), cls)

    def test_seeded_init(self):
        """Test the same seed gives identical weights."""
        a, b = build_net("sen2peak", seed=7), build_net("sen2peak", seed=7)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert torch.equal(pa, pb)
