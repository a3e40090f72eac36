"""
Checkpoint persistence: a torch state dict plus a JSON metadata sidecar.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Optional, Tuple

import torch

from spectrum_guard.exceptions import CheckpointMismatchError
from spectrum_guard.models import ArchitectureName, CheckpointMetadata, TrainConfig
from spectrum_guard.nets import BaseNet, build_net

logger = logging.getLogger(__name__)


def config_hash(config: TrainConfig) -> str:
    payload = json.dumps(config.model_dump(mode='json'), sort_keys=True)
    return hashlib.sha256(payload.encode('utf-8')).hexdigest()


def metadata_path(checkpoint_path: Path) -> Path:
    return Path(checkpoint_path).with_suffix('.json')


class CheckpointManager:
    """Saves and restores networks with their training metadata."""

    def save(self, net: BaseNet, path: Path, metadata: CheckpointMetadata) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(
            {'architecture': net.architecture.value, 'state_dict': net.state_dict()},
            path
        )
        with open(metadata_path(path), 'w', encoding='utf-8') as f:
            f.write(metadata.model_dump_json(indent=2))
        logger.debug(f"Saved {net.architecture.value} checkpoint (epoch {metadata.epoch}) to {path}")
        return path

    def load_metadata(self, path: Path) -> CheckpointMetadata:
        sidecar = metadata_path(path)
        if not Path(path).exists() or not sidecar.exists():
            raise CheckpointMismatchError(f"checkpoint or metadata missing: {path}")
        with open(sidecar, 'r', encoding='utf-8') as f:
            return CheckpointMetadata(**json.load(f))

    def load(
        self,
        path: Path,
        architecture: Optional[ArchitectureName] = None,
        dataset_fingerprint: Optional[str] = None,
        grid_size: Optional[int] = None,
        device: Optional[str] = None
    ) -> Tuple[BaseNet, CheckpointMetadata]:
        """
        Rebuild the network stored at ``path``.

        Raises:
            CheckpointMismatchError: On a different architecture or grid size,
                or weights that do not fit the network
        """
        metadata = self.load_metadata(path)
        if architecture is not None and metadata.architecture != ArchitectureName(architecture):
            raise CheckpointMismatchError(
                f"{path} holds {metadata.architecture.value}, expected {ArchitectureName(architecture).value}"
            )
        if grid_size is not None and metadata.grid_size != grid_size:
            raise CheckpointMismatchError(
                f"{path} was trained on a {metadata.grid_size} grid, dataset uses {grid_size}"
            )
        if dataset_fingerprint and metadata.dataset_fingerprint not in (None, dataset_fingerprint):
            logger.warning(
                f"{path} was trained on sensor layout {metadata.dataset_fingerprint}, "
                f"evaluating on {dataset_fingerprint}"
            )

        payload = torch.load(path, map_location=device or 'cpu', weights_only=True)
        net = build_net(metadata.architecture, grid_size=metadata.grid_size)
        try:
            net.load_state_dict(payload['state_dict'])
        except (RuntimeError, KeyError) as e:
            raise CheckpointMismatchError(f"weights in {path} do not fit {metadata.architecture.value}: {e}") from e
        if device:
            net.to(device)
        net.eval()
        logger.info(f"Loaded {metadata.architecture.value} checkpoint from {path} (epoch {metadata.epoch})")
        return net, metadata
