"""
Simulation, encoding, detection, power estimation, evaluation and run
bookkeeping utilities.
"""

from .seeding import SeedStreams
from .propagation import (
    path_loss,
    received_power,
    aggregate_power,
    compute_rss_map,
    transmitter_contributions,
    PathLossProvider,
    LogDistancePathLoss,
    TablePathLoss,
)
from .scene_sampler import sample_scene, disjoint_sensor_split, sensor_fingerprint
from .encoding import (
    encode_sensor_image,
    decode_sensor_image,
    render_label,
    encode_authorized_channel,
    detector_preprocess,
    crop_power_patch,
    upsample_testbed_grid,
    tile_sensor_image,
    save_matrix,
    load_matrix,
)
from .detection import (
    simple_peak_detect,
    subpixel_refine,
    decode_boxes,
    non_max_suppression,
    localize,
    remove_authorized,
    box_iou,
)
from .evaluation import (
    greedy_match,
    compute_rates,
    localization_error,
    power_error,
    evaluate_sample,
    evaluate_dataset,
    OraclePipeline,
)
from .power_estimation import (
    classify_isolated,
    estimate_raw_power,
    build_features,
    fit_correction,
    correct_power,
    estimate_powers,
    collect_correction_records,
)
from .checkpoint_manager import CheckpointManager
from .trainer import train_translation, train_subtractnet, train_detector, train_predpower
from .dataset_store import DatasetStore
from .experiment_tracker import ExperimentTracker
from .report_formatter import ReportFormatter, SummaryContext

__all__ = [
    'SeedStreams',
    'path_loss',
    'received_power',
    'aggregate_power',
    'compute_rss_map',
    'transmitter_contributions',
    'PathLossProvider',
    'LogDistancePathLoss',
    'TablePathLoss',
    'sample_scene',
    'disjoint_sensor_split',
    'sensor_fingerprint',
    'encode_sensor_image',
    'decode_sensor_image',
    'render_label',
    'encode_authorized_channel',
    'detector_preprocess',
    'crop_power_patch',
    'upsample_testbed_grid',
    'tile_sensor_image',
    'save_matrix',
    'load_matrix',
    'simple_peak_detect',
    'subpixel_refine',
    'decode_boxes',
    'non_max_suppression',
    'localize',
    'remove_authorized',
    'box_iou',
    'greedy_match',
    'compute_rates',
    'localization_error',
    'power_error',
    'evaluate_sample',
    'evaluate_dataset',
    'OraclePipeline',
    'classify_isolated',
    'estimate_raw_power',
    'build_features',
    'fit_correction',
    'correct_power',
    'estimate_powers',
    'collect_correction_records',
    'CheckpointManager',
    'train_translation',
    'train_subtractnet',
    'train_detector',
    'train_predpower',
    'DatasetStore',
    'ExperimentTracker',
    'ReportFormatter',
    'SummaryContext',
]
