"""
Data models for the spectrum_guard toolkit.
"""

from .propagation_models import PathLossModel, RadioEnvironment
from .scene_models import TransmitterKind, FieldConfig, Transmitter, Scene
from .encoding_models import PeakSpec, TestbedLayout
from .training_models import (
    NormType, ActivationType, ArchitectureName, ConvSpec,
    TrainConfig, DetectorHeadSpec, TrainingResult, CheckpointMetadata
)
from .detection_models import DetectionBox, DetectorThresholds
from .power_models import RegressorType, IsolationRule, CorrectionRecord, CorrectionModel
from .evaluation_models import MatchResult, Prediction, SampleResult, EvalReport
from .dataset_models import MANIFEST_VERSION, SampleRecord, DatasetManifest, LoadedSample
from .observability_models import StageMetrics, RunMetrics

__all__ = [
    'PathLossModel',
    'RadioEnvironment',
    'TransmitterKind',
    'FieldConfig',
    'Transmitter',
    'Scene',
    'PeakSpec',
    'TestbedLayout',
    # Networks and training
    'NormType',
    'ActivationType',
    'ArchitectureName',
    'ConvSpec',
    'TrainConfig',
    'DetectorHeadSpec',
    'TrainingResult',
    'CheckpointMetadata',
    # Detection and power
    'DetectionBox',
    'DetectorThresholds',
    'RegressorType',
    'IsolationRule',
    'CorrectionRecord',
    'CorrectionModel',
    # Evaluation and datasets
    'MatchResult',
    'Prediction',
    'SampleResult',
    'EvalReport',
    'MANIFEST_VERSION',
    'SampleRecord',
    'DatasetManifest',
    'LoadedSample',
    # Observability
    'StageMetrics',
    'RunMetrics',
]
