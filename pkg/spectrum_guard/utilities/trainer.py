"""
Training loops for every architecture.

All four share one loop: Adam at the configured learning rate, seeded weight
init and shuffling, per-epoch mean training loss, validation after each epoch
and a checkpoint whenever validation improves.
"""

import logging
import math
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from torch.utils.data import DataLoader, TensorDataset

from spectrum_guard.exceptions import EmptyDatasetError, ShapeMismatchError
from spectrum_guard.models import (
    CheckpointMetadata,
    DetectorHeadSpec,
    TrainConfig,
    TrainingResult,
)
from spectrum_guard.nets import BaseNet, Detector

from .checkpoint_manager import CheckpointManager, config_hash
from .detection import box_iou
from .encoding import detector_preprocess_batch
from .seeding import SHUFFLE, SeedStreams

logger = logging.getLogger(__name__)

LossFn = Callable[[BaseNet, Tuple[torch.Tensor, ...]], torch.Tensor]


def resolve_device(config: TrainConfig) -> torch.device:
    if config.device:
        return torch.device(config.device)
    return torch.device('cuda' if torch.cuda.is_available() else 'cpu')


def _loader(tensors: Sequence[torch.Tensor], config: TrainConfig, shuffle: bool) -> DataLoader:
    generator = torch.Generator()
    generator.manual_seed(SeedStreams(config.seed).integer_seed(SHUFFLE))
    return DataLoader(
        TensorDataset(*tensors),
        batch_size=config.batch_size,
        shuffle=shuffle,
        generator=generator
    )


def _mean_loss(net: BaseNet, loader: DataLoader, loss_fn: LossFn, device: torch.device) -> float:
    net.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for batch in loader:
            batch = tuple(t.to(device) for t in batch)
            total += float(loss_fn(net, batch)) * batch[0].shape[0]
            count += batch[0].shape[0]
    return total / max(count, 1)


def fit(
    net: BaseNet,
    loss_fn: LossFn,
    train_tensors: Sequence[torch.Tensor],
    config: TrainConfig,
    val_tensors: Optional[Sequence[torch.Tensor]] = None,
    checkpoint_path: Optional[Path] = None,
    dataset_fingerprint: Optional[str] = None,
    grid_size: int = 100,
    extra: Optional[Dict[str, str]] = None
) -> TrainingResult:
    """
    Generic training loop.

    Without validation tensors the training loss selects the best epoch.

    Raises:
        EmptyDatasetError: If there are no training samples
    """
    if len(train_tensors[0]) == 0:
        raise EmptyDatasetError(f"no training samples for {net.architecture.value}")
    device = resolve_device(config)
    net.to(device)
    optimizer = torch.optim.Adam(net.parameters(), lr=config.learning_rate)
    train_loader = _loader(train_tensors, config, shuffle=True)
    val_loader = _loader(val_tensors, config, shuffle=False) if val_tensors is not None and len(val_tensors[0]) else None

    manager = CheckpointManager()
    result = TrainingResult(architecture=net.architecture)
    best = math.inf
    for epoch in range(1, config.epochs + 1):
        net.train()
        total, count = 0.0, 0
        for batch in train_loader:
            batch = tuple(t.to(device) for t in batch)
            optimizer.zero_grad()
            loss = loss_fn(net, batch)
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * batch[0].shape[0]
            count += batch[0].shape[0]
        train_loss = total / count
        val_loss = _mean_loss(net, val_loader, loss_fn, device) if val_loader else train_loss
        result.train_losses.append(train_loss)
        result.val_losses.append(val_loss)
        logger.info(
            f"{net.architecture.value} epoch {epoch}/{config.epochs}: "
            f"train {train_loss:.6f}, val {val_loss:.6f}"
        )
        if val_loss < best:
            best = val_loss
            result.best_epoch = epoch
            result.best_val_loss = val_loss
            if checkpoint_path is not None:
                manager.save(net, checkpoint_path, CheckpointMetadata(
                    architecture=net.architecture,
                    config_hash=config_hash(config),
                    train_config=config,
                    epoch=epoch,
                    val_loss=val_loss,
                    dataset_fingerprint=dataset_fingerprint,
                    grid_size=grid_size,
                    extra=extra or {}
                ))
    if checkpoint_path is not None:
        result.checkpoint_path = str(checkpoint_path)
        net.load_state_dict(manager.load(checkpoint_path)[0].state_dict())
        net.to(device)
    return result


def _as_tensor(array: np.ndarray) -> torch.Tensor:
    return torch.as_tensor(np.asarray(array, dtype=np.float32))


def _image_loss(net: BaseNet, batch: Tuple[torch.Tensor, ...]) -> torch.Tensor:
    inputs, targets = batch
    return F.mse_loss(net(inputs), targets)


def train_translation(
    model: BaseNet,
    inputs: np.ndarray,
    targets: np.ndarray,
    config: TrainConfig,
    val: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    **kwargs
) -> TrainingResult:
    """
    Pixel-wise MSE training of an image-to-image network.

    Args:
        inputs: ``(N, C, H, W)`` normalized sensor images
        targets: ``(N, 1, H, W)`` peak labels (Sen2Peak) or intruder-only
            images (SubtractNet)
    """
    inputs, targets = np.asarray(inputs), np.asarray(targets)
    if len(inputs) != len(targets):
        raise ShapeMismatchError(f"{len(inputs)} inputs but {len(targets)} targets")
    val_tensors = None if val is None else (_as_tensor(val[0]), _as_tensor(val[1]))
    return fit(model, _image_loss, (_as_tensor(inputs), _as_tensor(targets)), config, val_tensors, **kwargs)


train_subtractnet = train_translation


def _power_loss(net: BaseNet, batch: Tuple[torch.Tensor, ...]) -> torch.Tensor:
    patches, powers = batch
    return F.mse_loss(net(patches), powers)


def train_predpower(
    model: BaseNet,
    patches: np.ndarray,
    powers: np.ndarray,
    config: TrainConfig,
    val: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    **kwargs
) -> TrainingResult:
    """Squared-error regression of true power from ``(N, 1, 21, 21)`` crops."""
    patches, powers = np.asarray(patches), np.asarray(powers).reshape(-1)
    if len(patches) != len(powers):
        raise ShapeMismatchError(f"{len(patches)} patches but {len(powers)} powers")
    val_tensors = None if val is None else (_as_tensor(val[0]), _as_tensor(np.asarray(val[1]).reshape(-1)))
    return fit(model, _power_loss, (_as_tensor(patches), _as_tensor(powers)), config, val_tensors, **kwargs)


def best_anchor(width: float, height: float, head: DetectorHeadSpec) -> int:
    """Index of the anchor with the highest IoU against a centered box."""
    anchors = np.array([[0.0, 0.0, w, h] for w, h in head.anchors])
    iou = box_iou(np.array([[0.0, 0.0, width, height]]), anchors)[0]
    return int(np.argmax(iou))


def build_detector_targets(
    boxes: Sequence[np.ndarray],
    head: DetectorHeadSpec,
    field_size: int = 100
) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Per-anchor regression targets and the responsibility mask.

    Each ground-truth box is assigned to the cell containing its center and
    the anchor of highest IoU.

    Returns:
        targets ``(B, grid, grid, anchors, 4 + classes)`` holding
        ``(x offset, y offset, log w/anchor, log h/anchor, class one-hot)`` and
        a boolean mask ``(B, grid, grid, anchors)``
    """
    scale = head.input_size / float(field_size)
    shape = (len(boxes), head.grid, head.grid, head.num_anchors)
    targets = torch.zeros(shape + (4 + head.num_classes,))
    mask = torch.zeros(shape, dtype=torch.bool)
    for b, sample_boxes in enumerate(boxes):
        for cx, cy, w, h in np.asarray(sample_boxes, dtype=np.float64).reshape(-1, 4):
            gx, gy = cx * scale / head.stride, cy * scale / head.stride
            i = min(int(gx), head.grid - 1)
            j = min(int(gy), head.grid - 1)
            a = best_anchor(w * scale, h * scale, head)
            aw, ah = head.anchors[a]
            targets[b, i, j, a, 0] = gx - i
            targets[b, i, j, a, 1] = gy - j
            targets[b, i, j, a, 2] = math.log(w * scale / aw)
            targets[b, i, j, a, 3] = math.log(h * scale / ah)
            targets[b, i, j, a, 4] = 1.0
            mask[b, i, j, a] = True
    return targets, mask


class DetectionLoss(nn.Module):
    """
    Single-scale detection loss: MSE on box terms of responsible anchors,
    BCE on objectness everywhere and BCE on class scores of responsible anchors.
    """

    def __init__(self, head: DetectorHeadSpec, field_size: int = 100):
        super().__init__()
        self.head = head
        self.field_size = field_size

    def forward(self, raw: torch.Tensor, boxes: Sequence[np.ndarray]) -> torch.Tensor:
        targets, mask = build_detector_targets(boxes, self.head, self.field_size)
        targets, mask = targets.to(raw.device), mask.to(raw.device)
        batch = raw.shape[0]
        objectness = F.binary_cross_entropy_with_logits(raw[..., 4], mask.float(), reduction='sum')
        if not mask.any():
            return objectness / batch
        picked = raw[mask]
        wanted = targets[mask]
        xy = F.mse_loss(torch.sigmoid(picked[:, :2]), wanted[:, :2], reduction='sum')
        wh = F.mse_loss(picked[:, 2:4], wanted[:, 2:4], reduction='sum')
        cls = F.binary_cross_entropy_with_logits(picked[:, 5:], wanted[:, 4:], reduction='sum')
        return (xy + wh + objectness + cls) / batch


def train_detector(
    model: Detector,
    images: np.ndarray,
    boxes: Sequence[np.ndarray],
    config: TrainConfig,
    val: Optional[Tuple[np.ndarray, Sequence[np.ndarray]]] = None,
    **kwargs
) -> TrainingResult:
    """
    Train the detector on peak images at the fixed 416 input size.

    Args:
        images: ``(N, 1, field, field)`` label images or translation outputs
        boxes: Per-image ``(n, 4)`` ground-truth ``(cx, cy, w, h)`` in field pixels
    """
    images = np.asarray(images)
    if len(images) != len(boxes):
        raise ShapeMismatchError(f"{len(images)} images but {len(boxes)} box lists")
    field_size = images.shape[-1] if images.ndim == 4 else 100
    criterion = DetectionLoss(model.head_spec, field_size)
    all_boxes: List[np.ndarray] = list(boxes)
    val_boxes: List[np.ndarray] = list(val[1]) if val is not None else []

    def _loss(net: BaseNet, batch: Tuple[torch.Tensor, ...]) -> torch.Tensor:
        batch_images, index, split = batch
        source = val_boxes if bool(split[0]) else all_boxes
        raw = net(detector_preprocess_batch(batch_images, net.head_spec.input_size))
        return criterion(raw, [source[int(k)] for k in index])

    train_tensors = (
        _as_tensor(images),
        torch.arange(len(images)),
        torch.zeros(len(images), dtype=torch.bool),
    )
    val_tensors = None
    if val is not None:
        val_images = np.asarray(val[0])
        val_tensors = (
            _as_tensor(val_images),
            torch.arange(len(val_images)),
            torch.ones(len(val_images), dtype=torch.bool),
        )
    return fit(model, _loss, train_tensors, config, val_tensors, **kwargs)
