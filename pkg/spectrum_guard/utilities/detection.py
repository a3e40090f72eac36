"""
Peak images to transmitter coordinates.

Two routes: ``simple_peak_detect`` + ``subpixel_refine`` on the translated
image, or the detector head decoded by ``decode_boxes`` and pruned by
``non_max_suppression``. Box coordinates are field pixels unless noted.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
from scipy.ndimage import maximum_filter
from scipy.special import expit

from spectrum_guard.exceptions import ShapeMismatchError
from spectrum_guard.models import DetectionBox, DetectorHeadSpec, DetectorThresholds, Transmitter

from .encoding import detector_preprocess_batch

logger = logging.getLogger(__name__)

Location = Tuple[float, float]

# ground-truth box side in field pixels, matching the 5x5 peak footprint
TARGET_BOX_SIZE = 5.0
# exp(tw) overflows well before this matters for box sizes
MAX_SIZE_LOGIT = 20.0

VARIANT_DETECTOR = "detector"
VARIANT_SIMPLEPEAK = "simplepeak"
VARIANTS = (VARIANT_DETECTOR, VARIANT_SIMPLEPEAK)


def simple_peak_detect(image: np.ndarray, x: float = 2.0, r: int = 3) -> List[Tuple[int, int]]:
    """
    Cells above ``x`` that are the maximum of their Chebyshev radius-``r`` window.

    Equal values inside a window are resolved in favor of the lowest
    ``(row, col)``.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ShapeMismatchError(f"expected a 2-D image, got shape {image.shape}")
    local_max = maximum_filter(image, size=2 * r + 1, mode='constant', cval=-np.inf)
    rows, cols = np.nonzero((image >= local_max) & (image > x))
    peaks = []
    for i, j in zip(rows.tolist(), cols.tolist()):
        r0, c0 = max(i - r, 0), max(j - r, 0)
        window = image[r0:i + r + 1, c0:j + r + 1]
        ties = np.argwhere(window == image[i, j]) + (r0, c0)
        if min(map(tuple, ties.tolist())) == (i, j):
            peaks.append((i, j))
    return sorted(peaks)


def subpixel_refine(image: np.ndarray, peak_cell: Tuple[int, int]) -> Location:
    """Value-weighted centroid of the 3x3 pixel centers around ``peak_cell``."""
    image = np.asarray(image, dtype=np.float64)
    i, j = peak_cell
    r0, r1 = max(i - 1, 0), min(i + 2, image.shape[0])
    c0, c1 = max(j - 1, 0), min(j + 2, image.shape[1])
    weights = np.clip(image[r0:r1, c0:c1], 0.0, None)
    total = weights.sum()
    if total <= 0:
        return (i + 0.5, j + 0.5)
    rows = np.arange(r0, r1) + 0.5
    cols = np.arange(c0, c1) + 0.5
    return (
        float((weights.sum(axis=1) * rows).sum() / total),
        float((weights.sum(axis=0) * cols).sum() / total),
    )


def peaks_to_locations(image: np.ndarray, x: float = 2.0, r: int = 3) -> List[Location]:
    return [subpixel_refine(image, cell) for cell in simple_peak_detect(image, x, r)]


def box_iou(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    """
    Pairwise IoU of ``(cx, cy, w, h)`` boxes.

    Returns:
        ``(len(a), len(b))`` matrix
    """
    a = np.asarray(boxes_a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(boxes_b, dtype=np.float64).reshape(-1, 4)
    a_min, a_max = a[:, None, :2] - a[:, None, 2:] / 2, a[:, None, :2] + a[:, None, 2:] / 2
    b_min, b_max = b[None, :, :2] - b[None, :, 2:] / 2, b[None, :, :2] + b[None, :, 2:] / 2
    extent = np.clip(np.minimum(a_max, b_max) - np.maximum(a_min, b_min), 0.0, None)
    inter = extent[..., 0] * extent[..., 1]
    union = (a[:, 2] * a[:, 3])[:, None] + (b[:, 2] * b[:, 3])[None, :] - inter
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(union > 0, inter / union, 0.0)


def target_boxes(transmitters: Sequence[Transmitter], size: float = TARGET_BOX_SIZE) -> np.ndarray:
    """Ground-truth ``(cx, cy, w, h)`` boxes, one square per transmitter."""
    if not transmitters:
        return np.zeros((0, 4))
    return np.array([[t.x, t.y, size, size] for t in transmitters], dtype=np.float64)


def decode_boxes(
    head: np.ndarray,
    thresholds: Optional[DetectorThresholds] = None,
    head_spec: Optional[DetectorHeadSpec] = None,
    field_size: int = 100
) -> List[DetectionBox]:
    """
    Decode a raw ``(grid, grid, anchors, 5 + classes)`` head into field boxes.

    Centers are ``(sigmoid(t) + cell) * stride``, sizes ``anchor * exp(t)``,
    confidence ``sigmoid(obj) * sigmoid(cls)``; everything is then divided by
    the detector-input to field scale. Boxes at or below ``thresholds.conf``
    are dropped.
    """
    thresholds = thresholds or DetectorThresholds()
    spec = head_spec or DetectorHeadSpec()
    if isinstance(head, torch.Tensor):
        head = head.detach().cpu().numpy()
    head = np.asarray(head, dtype=np.float64)
    expected = (spec.grid, spec.grid, spec.num_anchors, spec.values_per_anchor)
    if head.shape != expected:
        raise ShapeMismatchError(f"head must be {expected}, got {head.shape}")

    confidence = expit(head[..., 4]) * expit(head[..., 5:]).max(axis=-1)
    gi, gj, ga = np.nonzero(confidence > thresholds.conf)
    if gi.size == 0:
        return []
    scale = spec.input_size / float(field_size)
    anchors = np.asarray(spec.anchors, dtype=np.float64)
    t = head[gi, gj, ga]
    cx = (expit(t[:, 0]) + gi) * spec.stride / scale
    cy = (expit(t[:, 1]) + gj) * spec.stride / scale
    # expit saturates to 1.0 for large logits
    edge = np.nextafter(float(field_size), 0.0)
    cx, cy = np.minimum(cx, edge), np.minimum(cy, edge)
    w = anchors[ga, 0] * np.exp(np.clip(t[:, 2], -MAX_SIZE_LOGIT, MAX_SIZE_LOGIT)) / scale
    h = anchors[ga, 1] * np.exp(np.clip(t[:, 3], -MAX_SIZE_LOGIT, MAX_SIZE_LOGIT)) / scale
    conf = confidence[gi, gj, ga]
    return [
        DetectionBox(
            cx=float(a), cy=float(b), w=float(c), h=float(d), confidence=float(e), field_size=float(field_size)
        )
        for a, b, c, d, e in zip(cx, cy, w, h, conf)
    ]


def non_max_suppression(boxes: Sequence[DetectionBox], nms_threshold: float = 0.5) -> List[DetectionBox]:
    """Greedy sweep by descending confidence; drops boxes with IoU > threshold to a kept box."""
    if not boxes:
        return []
    order = sorted(range(len(boxes)), key=lambda k: -boxes[k].confidence)
    coords = np.array([[b.cx, b.cy, b.w, b.h] for b in boxes])
    iou = box_iou(coords, coords)
    kept: List[int] = []
    for k in order:
        if all(iou[k, other] <= nms_threshold for other in kept):
            kept.append(k)
    return [boxes[k] for k in kept]


@torch.no_grad()
def translate(model: torch.nn.Module, images: np.ndarray) -> np.ndarray:
    """
    Run an image-to-image network in eval mode.

    Args:
        model: Sen2Peak or SubtractNet
        images: ``(C, H, W)`` or ``(B, C, H, W)`` array

    Returns:
        ``(H, W)`` or ``(B, H, W)`` output
    """
    batch = np.asarray(images, dtype=np.float32)
    single = batch.ndim == 3
    if single:
        batch = batch[None]
    model.eval()
    device = next(model.parameters()).device
    out = model(torch.from_numpy(batch).to(device))[:, 0].cpu().numpy()
    return out[0] if single else out


@torch.no_grad()
def detect_boxes(
    peak_image: np.ndarray,
    detector: torch.nn.Module,
    thresholds: Optional[DetectorThresholds] = None
) -> List[DetectionBox]:
    """Preprocess, run the detector, decode and apply NMS."""
    thresholds = thresholds or DetectorThresholds()
    detector.eval()
    device = next(detector.parameters()).device
    field_size = peak_image.shape[-1]
    image = torch.as_tensor(np.asarray(peak_image, dtype=np.float32), device=device)[None, None]
    head = detector(detector_preprocess_batch(image, detector.head_spec.input_size))[0]
    boxes = decode_boxes(head, thresholds, detector.head_spec, field_size)
    return non_max_suppression(boxes, thresholds.nms)


def localize(
    sensor_image: np.ndarray,
    translation_model: torch.nn.Module,
    detector: Optional[torch.nn.Module] = None,
    thresholds: Optional[DetectorThresholds] = None,
    variant: str = VARIANT_DETECTOR,
    peak_threshold: float = 2.0,
    peak_radius: int = 3
) -> List[Location]:
    """
    Two-step localization of every transmitter visible in ``sensor_image``.

    Args:
        sensor_image: Normalized ``(H, W)`` image, or ``(C, H, W)`` for
            multi-channel translation inputs
        translation_model: Network producing the peak image
        detector: Required for the detector variant
        thresholds: Detector confidence/NMS thresholds
        variant: ``"detector"`` or ``"simplepeak"``

    Returns:
        Continuous ``(x, y)`` estimates in field pixels
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    image = np.asarray(sensor_image, dtype=np.float32)
    peak_image = translate(translation_model, image if image.ndim == 3 else image[None])
    if variant == VARIANT_SIMPLEPEAK:
        return peaks_to_locations(peak_image, peak_threshold, peak_radius)
    if detector is None:
        raise ValueError("the detector variant needs a detector model")
    return [box.center for box in detect_boxes(peak_image, detector, thresholds)]


def remove_authorized(
    estimates: Sequence[Location],
    authorized: Sequence[Location],
    radius: float = TARGET_BOX_SIZE
) -> List[Location]:
    """
    Drop the estimate nearest to each authorized user when within ``radius``.
    """
    remaining = list(estimates)
    for ax, ay in authorized:
        if not remaining:
            break
        dist = [np.hypot(x - ax, y - ay) for x, y in remaining]
        nearest = int(np.argmin(dist))
        if dist[nearest] <= radius:
            remaining.pop(nearest)
    return remaining
