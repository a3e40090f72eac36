"""
End-to-end localization pipeline.

Wires the trained networks into one object: optional authorized-user
handling, translation to a peak image, peak or box detection, and power
estimation with correction. ``create_run_dir`` gives every CLI run its own
timestamped output directory.
"""

import logging
import time
from datetime import datetime
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from spectrum_guard.config import ExperimentConfig
from spectrum_guard.models import ArchitectureName, CorrectionModel, LoadedSample, Prediction
from spectrum_guard.nets import BaseNet
from spectrum_guard.utilities.checkpoint_manager import CheckpointManager
from spectrum_guard.utilities.detection import (
    VARIANT_DETECTOR,
    VARIANTS,
    localize,
    remove_authorized,
    translate,
)
from spectrum_guard.utilities.encoding import (
    encode_authorized_channel,
    encode_sensor_image,
    stack_channels,
    tile_sensor_image,
)
from spectrum_guard.utilities.power_estimation import estimate_powers

logger = logging.getLogger(__name__)

AUTHORIZED_SUBTRACT = "subtract"
AUTHORIZED_REMOVE = "remove"
AUTHORIZED_MODES = (AUTHORIZED_SUBTRACT, AUTHORIZED_REMOVE)

Location = Tuple[float, float]


def create_run_dir(output_dir: Path, command: str) -> Tuple[str, Path]:
    """Timestamped run directory ``<output_dir>/<command>_<YYYYmmdd_HHMMSS>``."""
    base = Path(output_dir)
    base.mkdir(parents=True, exist_ok=True)
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    run_id = f"{command}_{timestamp}"
    run_dir = base / run_id
    suffix = 1
    while run_dir.exists():
        run_dir = base / f"{run_id}_{suffix}"
        suffix += 1
    run_dir.mkdir(parents=True)
    logger.info(f"Created run directory: {run_dir}")
    return run_dir.name, run_dir


class LocalizationPipeline:
    """Localize intruders (and estimate their power) in one sample at a time."""

    def __init__(
        self,
        config: ExperimentConfig,
        translation: BaseNet,
        detector: Optional[BaseNet] = None,
        predpower: Optional[BaseNet] = None,
        correction: Optional[CorrectionModel] = None,
        subtractnet: Optional[BaseNet] = None,
        variant: str = VARIANT_DETECTOR,
        authorized_mode: str = AUTHORIZED_SUBTRACT
    ):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
        if authorized_mode not in AUTHORIZED_MODES:
            raise ValueError(f"unknown authorized mode {authorized_mode!r}")
        if variant == VARIANT_DETECTOR and detector is None:
            raise ValueError("the detector variant needs a detector checkpoint")
        self.config = config
        self.translation = translation
        self.detector = detector
        self.predpower = predpower
        self.correction = correction
        self.subtractnet = subtractnet
        self.variant = variant
        self.authorized_mode = authorized_mode
        if authorized_mode == AUTHORIZED_SUBTRACT and subtractnet is None:
            logger.warning("authorized mode is subtract but no SubtractNet is loaded; authorized users stay in the image")

    @classmethod
    def from_checkpoints(
        cls,
        config: ExperimentConfig,
        translation_path: Path,
        detector_path: Optional[Path] = None,
        predpower_path: Optional[Path] = None,
        correction_path: Optional[Path] = None,
        subtractnet_path: Optional[Path] = None,
        variant: str = VARIANT_DETECTOR,
        authorized_mode: str = AUTHORIZED_SUBTRACT,
        dataset_fingerprint: Optional[str] = None,
        device: Optional[str] = None
    ) -> 'LocalizationPipeline':
        """Load every component, checking architecture and grid size."""
        manager = CheckpointManager()
        grid = config.field.grid_size

        def _load(path: Optional[Path], architecture: ArchitectureName, grid_size: Optional[int]):
            if path is None:
                return None
            return manager.load(path, architecture, dataset_fingerprint, grid_size, device)[0]

        return cls(
            config,
            translation=_load(translation_path, ArchitectureName.SEN2PEAK, grid),
            detector=_load(detector_path, ArchitectureName.DETECTOR, None),
            predpower=_load(predpower_path, ArchitectureName.PREDPOWER, None),
            correction=CorrectionModel.load(correction_path) if correction_path else None,
            subtractnet=_load(subtractnet_path, ArchitectureName.SUBTRACTNET, grid),
            variant=variant,
            authorized_mode=authorized_mode
        )

    @property
    def noise_floor(self) -> float:
        return self.config.propagation.noise_floor

    def intruder_image(self, sample: LoadedSample) -> np.ndarray:
        """Normalized sensor image, with authorized users subtracted when configured."""
        image = encode_sensor_image(sample.readings, sample.scene, self.noise_floor)
        authorized = sample.scene.authorized
        if authorized and self.authorized_mode == AUTHORIZED_SUBTRACT and self.subtractnet is not None:
            channel = encode_authorized_channel(
                authorized, self.noise_floor, self.config.peak, sample.scene.config.grid_size
            )
            image = translate(self.subtractnet, stack_channels(image, channel))
        return image

    def locate(self, image: np.ndarray) -> List[Location]:
        return localize(
            image,
            self.translation,
            self.detector,
            self.config.thresholds,
            self.variant
        )

    def predict(self, sample: LoadedSample) -> Prediction:
        started = time.perf_counter()
        image = self.intruder_image(sample)
        locations = self.locate(image)
        authorized = sample.scene.authorized
        if authorized and self.authorized_mode == AUTHORIZED_REMOVE:
            locations = remove_authorized(
                locations, [t.location for t in authorized], self.config.threshold_px
            )

        powers = raw = None
        if self.predpower is not None:
            powers, raw = estimate_powers(
                image, locations, self.predpower, self.correction, self.config.isolation
            )
        return Prediction(
            locations=[(float(x), float(y)) for x, y in locations],
            powers=powers,
            raw_powers=raw,
            latency_s=time.perf_counter() - started
        )

    def localize_tiled(self, image: np.ndarray, tile_size: Optional[int] = None) -> List[Location]:
        """
        Localize over a field larger than the network input by tiling.

        Estimates from each tile are shifted by the tile offset; those falling
        in the zero padding beyond the field are dropped. Transmitters near
        tile borders may be reported twice or missed.
        """
        tile_size = tile_size or self.config.field.grid_size
        rows, cols = np.asarray(image).shape
        found: List[Location] = []
        for (r0, c0), tile in tile_sensor_image(image, tile_size):
            for x, y in self.locate(tile):
                gx, gy = x + r0, y + c0
                if gx < rows and gy < cols:
                    found.append((gx, gy))
        logger.debug(f"Tiled localization found {len(found)} transmitters")
        return found
