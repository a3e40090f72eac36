"""
On-disk datasets: generation, manifests and loading.

Layout of one dataset directory::

    <root>/<name>/manifest.json              written last
    <root>/<name>/samples/<id>_scene.json     transmitters (sensors live in the manifest)
    <root>/<name>/samples/<id>_readings.bin   dBm per sensor, float32 LE (+ .json sidecar)
    <root>/<name>/samples/<id>_label.bin      peak label image
    <root>/<name>/samples/<id>_intruder_readings.bin   only with authorized users
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from spectrum_guard.exceptions import DatasetError
from spectrum_guard.models import (
    DatasetManifest,
    FieldConfig,
    IsolationRule,
    LoadedSample,
    PeakSpec,
    RadioEnvironment,
    SampleRecord,
    Scene,
    TransmitterKind,
)

from .detection import target_boxes
from .encoding import (
    crop_power_patch,
    encode_authorized_channel,
    encode_sensor_image,
    load_matrix,
    render_label,
    save_matrix,
    stack_channels,
)
from .power_estimation import classify_isolated
from .propagation import (
    PathLossProvider,
    aggregate_power_matrix,
    floor_readings,
    transmitter_contributions,
)
from .scene_sampler import sample_scene, sensor_fingerprint
from .seeding import SCENE, SHADOWING, SeedStreams

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
SAMPLES_DIR = "samples"

Cell = Tuple[int, int]


class DatasetStore:
    """
    Reads and writes datasets under a root directory.
    """

    def __init__(self, root: Path):
        self.root = Path(root)

    def dataset_dir(self, name: str) -> Path:
        return self.root / name

    def generate(
        self,
        name: str,
        field: FieldConfig,
        env: RadioEnvironment,
        num_samples: int,
        seed: int,
        sensors: Sequence[Cell],
        peak: Optional[PeakSpec] = None,
        candidate_cells: Optional[Sequence[Cell]] = None,
        sweep_param: Optional[str] = None,
        sweep_value: Optional[float] = None,
        provider: Optional[PathLossProvider] = None,
        workers: int = 1
    ) -> DatasetManifest:
        """
        Simulate ``num_samples`` scenes on a fixed sensor layout and write them.

        Sample ``k`` draws its scene and shadowing from streams keyed by the
        dataset name and ``k`` only, so output does not depend on ``workers``.
        """
        peak = peak or PeakSpec()
        directory = self.dataset_dir(name)
        samples_dir = directory / SAMPLES_DIR
        samples_dir.mkdir(parents=True, exist_ok=True)
        streams = SeedStreams(seed)
        sensors = [tuple(map(int, s)) for s in sensors]

        def _one(index: int) -> SampleRecord:
            sample_id = f"{index:06d}"
            scene = sample_scene(
                field,
                streams.generator(f"{SCENE}/{name}", index),
                sensors=sensors,
                candidate_cells=candidate_cells
            )
            contributions = transmitter_contributions(
                env, scene, streams.generator(f"{SHADOWING}/{name}", index), provider
            )
            readings = floor_readings(aggregate_power_matrix(contributions, axis=0), env.noise_floor)
            intruders = scene.intruders
            label = render_label(intruders, peak, field.grid_size)

            scene_file = f"{sample_id}_scene.json"
            with open(samples_dir / scene_file, 'w', encoding='utf-8') as f:
                json.dump(scene.model_dump(mode='json', exclude={'sensors'}), f)
            readings_file = f"{sample_id}_readings.bin"
            save_matrix(samples_dir / readings_file, readings)
            label_file = f"{sample_id}_label.bin"
            save_matrix(samples_dir / label_file, label)

            intruder_file = None
            if scene.authorized:
                intruder_rows = np.array(
                    [t.kind == TransmitterKind.INTRUDER for t in scene.transmitters], dtype=bool
                )
                intruder_readings = floor_readings(
                    aggregate_power_matrix(contributions[intruder_rows], axis=0), env.noise_floor
                )
                intruder_file = f"{sample_id}_intruder_readings.bin"
                save_matrix(samples_dir / intruder_file, intruder_readings)

            return SampleRecord(
                sample_id=sample_id,
                scene=f"{SAMPLES_DIR}/{scene_file}",
                readings=f"{SAMPLES_DIR}/{readings_file}",
                label=f"{SAMPLES_DIR}/{label_file}",
                intruder_readings=f"{SAMPLES_DIR}/{intruder_file}" if intruder_file else None,
                num_intruders=len(intruders)
            )

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                records = list(pool.map(_one, range(num_samples)))
        else:
            records = [_one(k) for k in range(num_samples)]

        manifest = DatasetManifest(
            name=name,
            field=field,
            propagation=env,
            sample_count=len(records),
            samples=records,
            seed=seed,
            sensors=sensors,
            sensor_fingerprint=sensor_fingerprint(sensors),
            sweep_param=sweep_param,
            sweep_value=sweep_value,
            candidate_cells=[tuple(c) for c in candidate_cells] if candidate_cells is not None else None
        )
        self.write_manifest(manifest)
        logger.info(f"Generated {len(records)} samples in {directory}")
        return manifest

    def write_manifest(self, manifest: DatasetManifest) -> Path:
        path = self.dataset_dir(manifest.name) / MANIFEST_FILE
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix('.json.tmp')
        with open(tmp, 'w', encoding='utf-8') as f:
            f.write(manifest.model_dump_json(indent=2))
        tmp.replace(path)
        return path

    @staticmethod
    def manifest_path(dataset: Path) -> Path:
        dataset = Path(dataset)
        return dataset if dataset.suffix == '.json' else dataset / MANIFEST_FILE

    @classmethod
    def load_manifest(cls, dataset: Path) -> DatasetManifest:
        """
        Args:
            dataset: Dataset directory or its manifest file

        Raises:
            DatasetError: If the manifest is missing or invalid
        """
        path = cls.manifest_path(dataset)
        if not path.exists():
            raise DatasetError(f"no dataset manifest at {path}")
        try:
            with open(path, 'r', encoding='utf-8') as f:
                return DatasetManifest(**json.load(f))
        except (ValueError, TypeError) as e:
            raise DatasetError(f"invalid manifest {path}: {e}") from e

    @classmethod
    def load_sample(cls, dataset: Path, manifest: DatasetManifest, record: SampleRecord) -> LoadedSample:
        base = cls.manifest_path(dataset).parent
        scene_path = base / record.scene
        if not scene_path.exists():
            raise DatasetError(f"sample {record.sample_id} scene missing: {scene_path}")
        with open(scene_path, 'r', encoding='utf-8') as f:
            data = json.load(f)
        scene = Scene(**{**data, 'sensors': manifest.sensors})
        n_sensors = len(manifest.sensors)
        grid = manifest.field.grid_size
        readings = load_matrix(base / record.readings, (n_sensors,))
        label = load_matrix(base / record.label, (grid, grid))
        intruder_readings = None
        if record.intruder_readings:
            intruder_readings = load_matrix(base / record.intruder_readings, (n_sensors,))
        return LoadedSample(
            sample_id=record.sample_id,
            scene=scene,
            readings=readings.astype(np.float64),
            label=label.astype(np.float64),
            intruder_readings=None if intruder_readings is None else intruder_readings.astype(np.float64),
            sweep_value=manifest.sweep_value
        )

    @classmethod
    def iter_samples(
        cls,
        dataset: Path,
        manifest: Optional[DatasetManifest] = None,
        limit: Optional[int] = None
    ) -> Iterator[LoadedSample]:
        manifest = manifest or cls.load_manifest(dataset)
        records = manifest.samples if limit is None else manifest.samples[:limit]
        for record in records:
            yield cls.load_sample(dataset, manifest, record)


def sensor_images(samples: Sequence[LoadedSample], noise_floor: float) -> np.ndarray:
    """``(N, 1, H, W)`` normalized sensor images."""
    return np.stack([
        encode_sensor_image(s.readings, s.scene, noise_floor)[None] for s in samples
    ])


def translation_arrays(samples: Sequence[LoadedSample], noise_floor: float) -> Tuple[np.ndarray, np.ndarray]:
    """Sen2Peak inputs and peak labels."""
    inputs = sensor_images(samples, noise_floor)
    labels = np.stack([s.label[None] for s in samples])
    return inputs, labels


def subtraction_arrays(
    samples: Sequence[LoadedSample],
    noise_floor: float,
    peak: Optional[PeakSpec] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """SubtractNet two-channel inputs and intruder-only targets."""
    inputs, targets = [], []
    for s in samples:
        grid = s.scene.config.grid_size
        mixed = encode_sensor_image(s.readings, s.scene, noise_floor)
        channel = encode_authorized_channel(s.scene.authorized, noise_floor, peak, grid)
        inputs.append(stack_channels(mixed, channel))
        intruder_only = s.intruder_readings if s.intruder_readings is not None else s.readings
        targets.append(encode_sensor_image(intruder_only, s.scene, noise_floor)[None])
    return np.stack(inputs), np.stack(targets)


def detector_arrays(samples: Sequence[LoadedSample]) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Peak labels and their ground-truth boxes."""
    images = np.stack([s.label[None] for s in samples])
    return images, [target_boxes(s.scene.intruders) for s in samples]


def isolated_power_arrays(
    samples: Sequence[LoadedSample],
    noise_floor: float,
    isolation_radius: float = 20.0
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Crops around every isolated intruder and its true power.

    Isolation is judged on true locations of all transmitters.
    """
    rule = IsolationRule(isolation_radius=isolation_radius)
    patches, powers = [], []
    for s in samples:
        image = encode_sensor_image(s.readings, s.scene, noise_floor)
        transmitters = s.scene.transmitters
        isolated = classify_isolated([t.location for t in transmitters], rule)
        for tx, alone in zip(transmitters, isolated):
            if alone and tx.kind == TransmitterKind.INTRUDER:
                patches.append(crop_power_patch(image, tx.location)[None])
                powers.append(tx.power)
    if not patches:
        return np.zeros((0, 1, 21, 21)), np.zeros(0)
    return np.stack(patches), np.asarray(powers, dtype=np.float64)
