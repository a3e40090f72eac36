#!/usr/bin/env python3
"""
Command-line entry point: dataset generation, training, evaluation sweeps,
correction fitting and plotting.
"""

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from spectrum_guard.config import ExperimentConfig
from spectrum_guard.exceptions import ConfigError, EmptyDatasetError, SpectrumGuardError
from spectrum_guard.models import ArchitectureName, RegressorType
from spectrum_guard.nets import build_net
from spectrum_guard.pipeline import AUTHORIZED_MODES, AUTHORIZED_SUBTRACT, LocalizationPipeline, create_run_dir
from spectrum_guard.utilities import (
    CheckpointManager,
    DatasetStore,
    ExperimentTracker,
    OraclePipeline,
    ReportFormatter,
    SummaryContext,
    disjoint_sensor_split,
    evaluate_dataset,
    fit_correction,
    collect_correction_records,
    upsample_testbed_grid,
)
from spectrum_guard.utilities.dataset_store import (
    detector_arrays,
    isolated_power_arrays,
    sensor_images,
    subtraction_arrays,
    translation_arrays,
)
from spectrum_guard.utilities.detection import VARIANT_DETECTOR, VARIANTS, target_boxes, translate
from spectrum_guard.utilities.encoding import encode_sensor_image
from spectrum_guard.utilities.evaluation import (
    DENOMINATOR_INTRUDERS,
    DENOMINATOR_PREDICTIONS,
    SWEEP_DENSITY,
    SWEEP_NUM_TX,
    read_reports,
    read_sample_dumps,
    write_reports_csv,
    write_reports_json,
    write_sample_dumps,
)
from spectrum_guard.utilities.experiment_tracker import redact_uri
from spectrum_guard.utilities.power_estimation import estimate_raw_powers
from spectrum_guard.utilities.scene_sampler import sample_sensors
from spectrum_guard.utilities.seeding import SENSORS, WEIGHTS, SeedStreams
from spectrum_guard.utilities.trainer import (
    train_detector,
    train_predpower,
    train_subtractnet,
    train_translation,
)

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
VALIDATION_FRACTION = 0.1


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', type=Path, help='Experiment config JSON (default: packaged experiment_config.json)')
    parser.add_argument('--seed', type=int, help='Root seed (overrides config)')
    parser.add_argument('--out', type=Path, help='Output directory (overrides config output_dir)')
    parser.add_argument('--workers', type=int, help='Worker threads for generation/evaluation')
    parser.add_argument(
        '--log-level',
        default='INFO',
        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
        help='Logging level (default: INFO)'
    )
    parser.add_argument(
        '--es-uri',
        type=str,
        default=os.getenv('ELASTICSEARCH_URI'),
        help='ElasticSearch URI (default: from ELASTICSEARCH_URI env var)'
    )
    parser.add_argument(
        '--es-api-key',
        type=str,
        default=os.getenv('ELASTICSEARCH_API_KEY'),
        help='ElasticSearch API key (default: from ELASTICSEARCH_API_KEY env var)'
    )


def _add_detection_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--checkpoint', action='append', default=[], metavar='MODEL=PATH',
                        help='Checkpoint per model, e.g. sen2peak=runs/x/sen2peak.pt (repeatable)')
    parser.add_argument('--variant', choices=list(VARIANTS) + ['both'], default=VARIANT_DETECTOR,
                        help='Peak-to-location step (default: detector)')
    parser.add_argument('--conf', type=float, help='Detector confidence threshold')
    parser.add_argument('--nms', type=float, help='Detector NMS IoU threshold')
    parser.add_argument('--threshold-px', type=float, help='Matching eligibility threshold in pixels')
    parser.add_argument('--authorized-mode', choices=AUTHORIZED_MODES, default=AUTHORIZED_SUBTRACT,
                        help='Handle authorized users by SubtractNet or by removing their detections')
    parser.add_argument('--num-samples', type=int, help='Use only the first N samples')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='spectrum-guard',
        description="Multi-transmitter localization from distributed RSS sensors"
    )
    sub = parser.add_subparsers(dest='command', required=True)

    gen = sub.add_parser('generate', help='Simulate train/test datasets')
    _add_common(gen)
    gen.add_argument('--num-samples', type=int, help='Samples per dataset (default: config train/test counts)')
    gen.add_argument('--split', choices=['train', 'test', 'both'], default='both')
    gen.add_argument('--authorized', type=int, help='Authorized users per scene')
    gen.add_argument('--sweep', choices=[SWEEP_NUM_TX, SWEEP_DENSITY],
                     help='Also write one test dataset per sweep value')
    gen.add_argument('--testbed-grid', type=Path,
                     help='JSON {grid_size, pixel_size, sensors} of a small testbed to upsample')
    gen.add_argument('--name', default='', help='Prefix for dataset names')

    train = sub.add_parser('train', help='Train one model')
    _add_common(train)
    train.add_argument('--dataset', type=Path, required=True, help='Training dataset directory')
    train.add_argument('--val-dataset', type=Path, help='Validation dataset (default: hold out 10%%)')
    train.add_argument('--model', choices=[a.value for a in ArchitectureName], required=True)
    train.add_argument('--translation-checkpoint', type=Path,
                       help='Train the detector on this Sen2Peak\'s outputs instead of labels')
    train.add_argument('--epochs', type=int, help='Override epochs')
    train.add_argument('--num-samples', type=int, help='Use only the first N samples')

    ev = sub.add_parser('eval', help='Evaluate checkpoints on test datasets')
    _add_common(ev)
    _add_detection_flags(ev)
    ev.add_argument('--dataset', type=Path, action='append', required=True, help='Test dataset (repeatable)')
    ev.add_argument('--correction', type=Path, help='Correction model JSON')
    ev.add_argument('--sweep', choices=[SWEEP_NUM_TX, SWEEP_DENSITY], help='Swept parameter')
    ev.add_argument('--oracle', action='store_true', help='Score ground truth passed through verbatim')
    ev.add_argument('--false-alarm-denominator', choices=[DENOMINATOR_PREDICTIONS, DENOMINATOR_INTRUDERS],
                    default=DENOMINATOR_PREDICTIONS)

    fit = sub.add_parser('power-fit', help='Fit the power correction model')
    _add_common(fit)
    _add_detection_flags(fit)
    fit.add_argument('--dataset', type=Path, required=True, help='Dataset to collect records from')
    fit.add_argument('--alpha', type=float, help='Regularization strength (default: config correction_alpha)')
    fit.add_argument('--regressor', choices=[r.value for r in RegressorType], default=RegressorType.RIDGE.value)
    fit.add_argument('--true-locations', action='store_true',
                     help='Estimate powers at ground-truth locations; no sen2peak or detector needed')

    plot = sub.add_parser('plot', help='Plot evaluation reports')
    _add_common(plot)
    plot.add_argument('--reports', type=Path, action='append', default=[], help='reports.json (repeatable)')
    plot.add_argument('--dumps', type=Path, action='append', default=[], help='samples.jsonl (repeatable)')
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.from_json(args.config)
    return config.with_overrides(
        seed=args.seed,
        output_dir=str(args.out) if args.out else None,
        workers=args.workers
    )


def run_arguments(args: argparse.Namespace) -> Dict[str, object]:
    """Command arguments as recorded with the run, without credentials."""
    arguments = {k: v for k, v in vars(args).items() if k != 'es_api_key'}
    if 'es_uri' in arguments:
        arguments['es_uri'] = redact_uri(arguments['es_uri'])
    return arguments


def parse_checkpoints(values: Sequence[str]) -> Dict[ArchitectureName, Path]:
    checkpoints: Dict[ArchitectureName, Path] = {}
    for value in values:
        if '=' not in value:
            raise ConfigError(f"--checkpoint expects MODEL=PATH, got {value!r}")
        name, path = value.split('=', 1)
        try:
            checkpoints[ArchitectureName(name)] = Path(path)
        except ValueError as e:
            raise ConfigError(f"unknown model {name!r} in --checkpoint") from e
    return checkpoints


def _with_detection_overrides(config: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    thresholds = config.thresholds.model_copy(update={
        k: v for k, v in (('conf', args.conf), ('nms', args.nms)) if v is not None
    })
    return config.with_overrides(thresholds=thresholds.model_dump(), threshold_px=args.threshold_px)


def cmd_generate(args: argparse.Namespace, config: ExperimentConfig, run_dir: Path, tracker: ExperimentTracker) -> None:
    streams = SeedStreams(config.seed)
    field = config.field
    env = config.propagation
    if args.authorized is not None:
        field = field.model_copy(update={'num_authorized': args.authorized})

    candidate_cells = None
    if args.testbed_grid:
        with open(args.testbed_grid, 'r', encoding='utf-8') as f:
            grid = json.load(f)
        layout = upsample_testbed_grid(
            [tuple(s) for s in grid['sensors']],
            streams.generator(SENSORS),
            grid_size=int(grid.get('grid_size', 10)),
            pixel_size=float(grid.get('pixel_size', 3.2))
        )
        field = field.model_copy(update={
            'grid_size': layout.grid_size,
            'pixel_size': layout.pixel_size,
            'sensor_density': layout.sensor_density,
        })
        env = env.model_copy(update={'pixel_size': layout.pixel_size})
        train_sensors = test_sensors = layout.sensors
        candidate_cells = layout.candidate_cells
        logger.warning("Testbed layouts share one sensor set between train and test")
    else:
        train_sensors, test_sensors = disjoint_sensor_split(field, streams.generator(SENSORS))

    store = DatasetStore(run_dir)
    prefix = f"{args.name}_" if args.name else ""
    jobs = []
    if args.split in ('train', 'both'):
        jobs.append((f"{prefix}train", field, train_sensors, args.num_samples or config.num_train_samples, None, None))
    if args.split in ('test', 'both'):
        count = args.num_samples or config.num_test_samples
        jobs.append((f"{prefix}test", field, test_sensors, count, None, None))
        if args.sweep == SWEEP_NUM_TX:
            for n in config.sweep.num_tx:
                jobs.append((f"{prefix}test_num_tx_{n}", field.model_copy(update={'num_intruders': n}),
                             test_sensors, count, SWEEP_NUM_TX, float(n)))
        elif args.sweep == SWEEP_DENSITY:
            for k, density in enumerate(config.sweep.density):
                cell_field = field.model_copy(update={'sensor_density': density})
                sensors = sample_sensors(cell_field, streams.generator(f"{SENSORS}/density", k), exclude=train_sensors)
                jobs.append((f"{prefix}test_density_{density:g}", cell_field, sensors, count,
                             SWEEP_DENSITY, float(density)))

    for name, job_field, sensors, count, sweep_param, sweep_value in jobs:
        with tracker.stage(f"generate:{name}") as stage:
            store.generate(
                name, job_field, env, count, config.seed, sensors,
                peak=config.peak,
                candidate_cells=candidate_cells,
                sweep_param=sweep_param,
                sweep_value=sweep_value,
                workers=config.workers
            )
            stage.items = count
    print(f"Datasets written to {run_dir}")


def _split_validation(samples: List, val_dataset: Optional[Path], limit: Optional[int]):
    if val_dataset is not None:
        return samples, list(DatasetStore.iter_samples(val_dataset, limit=limit))
    cut = max(1, int(round(len(samples) * (1 - VALIDATION_FRACTION)))) if len(samples) > 1 else len(samples)
    return samples[:cut], samples[cut:]


def cmd_train(args: argparse.Namespace, config: ExperimentConfig, run_dir: Path, tracker: ExperimentTracker) -> None:
    architecture = ArchitectureName(args.model)
    train_config = config.train_config(architecture)
    if args.epochs:
        train_config = train_config.model_copy(update={'epochs': args.epochs})
    if args.seed is not None:
        train_config = train_config.model_copy(update={'seed': args.seed})

    manifest = DatasetStore.load_manifest(args.dataset)
    with tracker.stage("load") as stage:
        samples = list(DatasetStore.iter_samples(args.dataset, manifest, args.num_samples))
        train_samples, val_samples = _split_validation(samples, args.val_dataset, args.num_samples)
        stage.items = len(samples)
    if not train_samples:
        raise EmptyDatasetError(f"no training samples loaded from {args.dataset}")

    noise_floor = manifest.propagation.noise_floor
    net = build_net(
        architecture,
        seed=SeedStreams(train_config.seed).integer_seed(WEIGHTS),
        grid_size=manifest.field.grid_size
    )
    checkpoint = run_dir / f"{architecture.value}.pt"
    common = dict(
        checkpoint_path=checkpoint,
        dataset_fingerprint=manifest.sensor_fingerprint,
        grid_size=manifest.field.grid_size,
        extra={'dataset': str(args.dataset)}
    )

    with tracker.stage(f"train:{architecture.value}") as stage:
        if architecture == ArchitectureName.SEN2PEAK:
            result = train_translation(
                net, *translation_arrays(train_samples, noise_floor), train_config,
                val=translation_arrays(val_samples, noise_floor) if val_samples else None, **common
            )
        elif architecture == ArchitectureName.SUBTRACTNET:
            result = train_subtractnet(
                net, *subtraction_arrays(train_samples, noise_floor, config.peak), train_config,
                val=subtraction_arrays(val_samples, noise_floor, config.peak) if val_samples else None, **common
            )
        elif architecture == ArchitectureName.PREDPOWER:
            radius = config.isolation.isolation_radius
            result = train_predpower(
                net, *isolated_power_arrays(train_samples, noise_floor, radius), train_config,
                val=isolated_power_arrays(val_samples, noise_floor, radius) if val_samples else None, **common
            )
        else:
            result = train_detector(
                net, *_detector_inputs(train_samples, noise_floor, args.translation_checkpoint, manifest),
                train_config,
                val=_detector_inputs(val_samples, noise_floor, args.translation_checkpoint, manifest)
                if val_samples else None,
                **common
            )
        stage.items = train_config.epochs

    curve = run_dir / f"{architecture.value}_loss.csv"
    with open(curve, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(['epoch', 'train_loss', 'val_loss'])
        for epoch, (t, v) in enumerate(zip(result.train_losses, result.val_losses), 1):
            writer.writerow([epoch, t, v])
    best = "n/a" if result.best_val_loss is None else f"{result.best_val_loss:.6f}"
    print(f"Best epoch {result.best_epoch} (val {best}); checkpoint {checkpoint}")


def _detector_inputs(samples, noise_floor: float, translation_checkpoint: Optional[Path], manifest):
    if translation_checkpoint is None:
        return detector_arrays(samples)
    translation, _ = CheckpointManager().load(
        translation_checkpoint, ArchitectureName.SEN2PEAK,
        manifest.sensor_fingerprint, manifest.field.grid_size
    )
    outputs = translate(translation, sensor_images(samples, noise_floor))
    return outputs[:, None], [target_boxes(s.scene.intruders) for s in samples]


def _for_dataset(config: ExperimentConfig, manifest) -> ExperimentConfig:
    """Adopt the field and radio environment a dataset was generated with."""
    return config.with_overrides(
        field=manifest.field.model_dump(),
        propagation=manifest.propagation.model_dump()
    )


def _requested_cells(sweep: Optional[str], manifest, config: ExperimentConfig) -> Optional[List[float]]:
    """Cells to report for a num_tx sweep over one mixed dataset; None otherwise."""
    if sweep == SWEEP_NUM_TX and manifest.sweep_value is None:
        return [float(n) for n in config.sweep.num_tx]
    return None


def _build_pipelines(
    args: argparse.Namespace,
    config: ExperimentConfig,
    fingerprint: Optional[str],
    variants: Sequence[str]
) -> Dict[str, object]:
    if getattr(args, 'oracle', False):
        return {'oracle': OraclePipeline()}
    checkpoints = parse_checkpoints(args.checkpoint)
    if ArchitectureName.SEN2PEAK not in checkpoints:
        raise ConfigError("a sen2peak checkpoint is required (--checkpoint sen2peak=PATH)")
    if VARIANT_DETECTOR in variants and ArchitectureName.DETECTOR not in checkpoints:
        raise ConfigError("the detector variant needs --checkpoint detector=PATH")
    correction = getattr(args, 'correction', None)
    return {
        variant: LocalizationPipeline.from_checkpoints(
            config,
            checkpoints[ArchitectureName.SEN2PEAK],
            detector_path=checkpoints.get(ArchitectureName.DETECTOR),
            predpower_path=checkpoints.get(ArchitectureName.PREDPOWER),
            correction_path=correction,
            subtractnet_path=checkpoints.get(ArchitectureName.SUBTRACTNET),
            variant=variant,
            authorized_mode=args.authorized_mode,
            dataset_fingerprint=fingerprint
        )
        for variant in variants
    }


def cmd_eval(args: argparse.Namespace, config: ExperimentConfig, run_dir: Path, tracker: ExperimentTracker) -> None:
    config = _with_detection_overrides(config, args)
    variants = list(VARIANTS) if args.variant == 'both' else [args.variant]
    reports, dumps = [], []
    for dataset in args.dataset:
        manifest = DatasetStore.load_manifest(dataset)
        config = _for_dataset(config, manifest)
        pipelines = _build_pipelines(args, config, manifest.sensor_fingerprint, variants)
        samples = list(DatasetStore.iter_samples(dataset, manifest, args.num_samples))
        for variant, pipeline in pipelines.items():
            with tracker.stage(f"eval:{manifest.name}:{variant}") as stage:
                cell_reports, results = evaluate_dataset(
                    pipeline,
                    samples,
                    threshold=config.threshold_px,
                    pixel_size=manifest.field.pixel_size,
                    variant=variant,
                    sweep_param=args.sweep or manifest.sweep_param,
                    sweep_values=_requested_cells(args.sweep, manifest, config),
                    false_alarm_denominator=args.false_alarm_denominator,
                    workers=config.workers
                )
                stage.items = len(results)
            reports.extend(cell_reports)
            dumps.extend(results)

    tracker.add_reports(reports)
    write_reports_json(reports, run_dir / "reports.json")
    write_reports_csv(reports, run_dir / "reports.csv")
    write_sample_dumps(dumps, run_dir / "samples.jsonl")
    ReportFormatter().save_summary(
        SummaryContext(
            dataset=", ".join(str(d) for d in args.dataset),
            threshold_px=config.threshold_px,
            pixel_size=config.field.pixel_size,
            reports=reports
        ),
        run_dir / "summary.md"
    )
    for report in reports:
        print(",".join(str(v) for v in report.csv_row()))


def cmd_power_fit(args: argparse.Namespace, config: ExperimentConfig, run_dir: Path, tracker: ExperimentTracker) -> None:
    config = _with_detection_overrides(config, args)
    manifest = DatasetStore.load_manifest(args.dataset)
    config = _for_dataset(config, manifest)
    checkpoints = parse_checkpoints(args.checkpoint)
    if ArchitectureName.PREDPOWER not in checkpoints:
        raise ConfigError("a predpower checkpoint is required (--checkpoint predpower=PATH)")
    if args.true_locations:
        predpower, _ = CheckpointManager().load(checkpoints[ArchitectureName.PREDPOWER], ArchitectureName.PREDPOWER)
        noise_floor = manifest.propagation.noise_floor

        def _estimate(sample) -> Tuple[List, List[float]]:
            locations = [t.location for t in sample.scene.intruders]
            image = encode_sensor_image(sample.readings, sample.scene, noise_floor)
            return locations, estimate_raw_powers(image, locations, predpower)
    else:
        variant = VARIANT_DETECTOR if args.variant == 'both' else args.variant
        pipeline = _build_pipelines(args, config, manifest.sensor_fingerprint, [variant])[variant]

        def _estimate(sample) -> Tuple[List, List[float]]:
            prediction = pipeline.predict(sample)
            return prediction.locations, prediction.raw_powers or []

    records = []
    with tracker.stage("collect") as stage:
        for sample in DatasetStore.iter_samples(args.dataset, manifest, args.num_samples):
            locations, raw_powers = _estimate(sample)
            intruders = sample.scene.intruders
            records.extend(collect_correction_records(
                [t.location for t in intruders],
                [t.power for t in intruders],
                locations,
                raw_powers,
                config.threshold_px,
                config.isolation
            ))
        stage.items = len(records)

    alpha = args.alpha if args.alpha is not None else config.correction_alpha
    with tracker.stage("fit") as stage:
        model = fit_correction(records, alpha, RegressorType(args.regressor), config.isolation.neighbor_radius)
        stage.items = len(records)
    path = model.save(run_dir / "correction.json")
    print(f"Correction model ({len(records)} records, M={model.max_neighbors}) saved to {path}")


def cmd_plot(args: argparse.Namespace, config: ExperimentConfig, run_dir: Path, tracker: ExperimentTracker) -> None:
    from spectrum_guard.utilities.plotting import plot_error_cdf, plot_error_vs_sweep, plot_stacked_rates

    if not args.reports and not args.dumps:
        raise ConfigError("nothing to plot: pass --reports and/or --dumps")
    written = []
    with tracker.stage("plot") as stage:
        if args.reports:
            reports = [r for path in args.reports for r in read_reports(path)]
            sweep = next((r.sweep_param for r in reports if r.sweep_param), "cell")
            written.append(plot_error_vs_sweep(reports, run_dir / f"error_vs_{sweep}.png"))
            written.append(plot_stacked_rates(reports, run_dir / "stacked_rates.png"))
        if args.dumps:
            results = [r for path in args.dumps for r in read_sample_dumps(path)]
            written.append(plot_error_cdf(results, run_dir / "error_cdf.png"))
        stage.items = len(written)
    for path in written:
        print(path)


COMMANDS = {
    'generate': cmd_generate,
    'train': cmd_train,
    'eval': cmd_eval,
    'power-fit': cmd_power_fit,
    'plot': cmd_plot,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)

    tracker = None
    try:
        config = load_config(args)
        run_id, run_dir = create_run_dir(Path(config.output_dir), args.command.replace('-', '_'))
        tracker = ExperimentTracker(run_dir, es_uri=args.es_uri, es_api_key=args.es_api_key)
        tracker.start_run(run_id, args.command, seed=config.seed, arguments=run_arguments(args))
        COMMANDS[args.command](args, config, run_dir, tracker)
        tracker.end_run(success=True)
        return 0
    except (SpectrumGuardError, OSError, ValueError) as e:
        code = getattr(e, 'code', 'io_error' if isinstance(e, OSError) else 'validation_error')
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        if tracker is not None and tracker.current_run is not None:
            tracker.end_run(success=False, error=str(e))
        sys.stderr.write(json.dumps({'error': code, 'message': str(e), 'command': args.command}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
