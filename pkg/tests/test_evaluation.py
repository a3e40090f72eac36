"""
Tests for matching and metrics.

Tests include:
- Greedy thresholded matching (worked examples and an optimal-assignment oracle)
- Miss / false-alarm rates under both denominators
- Localization and power errors
- Dataset evaluation with sweep grouping and report files
"""

import csv
import sys
from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

sys.path.insert(0, str(Path(__file__).parent.parent))

from spectrum_guard.models import (
    EvalReport, FieldConfig, LoadedSample, Prediction, Scene, Transmitter, TransmitterKind
)
from spectrum_guard.utilities.evaluation import (
    DENOMINATOR_INTRUDERS,
    OraclePipeline,
    SWEEP_NUM_TX,
    aggregate_results,
    compute_rates,
    evaluate_dataset,
    evaluate_sample,
    greedy_match,
    localization_error,
    power_error,
    read_reports,
    read_sample_dumps,
    write_reports_csv,
    write_reports_json,
    write_sample_dumps,
)

GT4 = [(10.0, 10.0), (30.0, 30.0), (50.0, 50.0), (70.0, 70.0)]


def make_sample(sample_id: str, intruders, authorized=(), sweep_value=None) -> LoadedSample:
    transmitters = [Transmitter(x=x, y=y, power=p) for x, y, p in intruders]
    transmitters += [
        Transmitter(x=x, y=y, power=p, kind=TransmitterKind.AUTHORIZED) for x, y, p in authorized
    ]
    scene = Scene(config=FieldConfig(), sensors=[(0, 0)], transmitters=transmitters)
    return LoadedSample(
        sample_id=sample_id,
        scene=scene,
        readings=np.array([-80.0]),
        sweep_value=sweep_value
    )


class FixedPipeline:
    """Returns canned predictions keyed by sample id."""

    def __init__(self, predictions):
        self.predictions = predictions

    def predict(self, sample):
        return self.predictions[sample.sample_id]


class TestGreedyMatch:
    """Tests for thresholded greedy matching."""

    def test_two_false_alarms(self):
        """Test 4 truths and 6 nearby predictions give 0 misses and 2 false alarms."""
        preds = [(x + 1.0, y) for x, y in GT4] + [(31.0, 31.0), (11.0, 11.0)]
        match = greedy_match(GT4, preds, threshold=5.0)
        assert len(match.misses) == 0 and len(match.false_alarms) == 2
        assert compute_rates(match, 4, 6) == pytest.approx((0.0, 1.0 / 3.0))

    def test_one_miss(self):
        """Test 4 truths and 3 nearby predictions give 1 miss and 0 false alarms."""
        preds = [(x, y + 1.0) for x, y in GT4[:3]]
        match = greedy_match(GT4, preds, threshold=5.0)
        assert match.misses == [3] and match.false_alarms == []
        assert compute_rates(match, 4, 3) == pytest.approx((0.25, 0.0))

    def test_ineligible_pair(self):
        """Test a pair just beyond the threshold is one miss and one false alarm."""
        match = greedy_match([(0.0, 0.0)], [(5.0 + 1e-9, 0.0)], threshold=5.0)
        assert match.pairs == [] and match.misses == [0] and match.false_alarms == [0]

    def test_nothing_at_all(self):
        """Test no truths and no predictions rate (0, 0)."""
        match = greedy_match([], [], threshold=5.0)
        assert compute_rates(match, 0, 0) == (0.0, 0.0)

    def test_globally_closest_first(self):
        """Test the closest pair is matched first even if it starves another truth."""
        match = greedy_match([(0.0, 0.0), (3.0, 0.0)], [(2.0, 0.0)], threshold=5.0)
        assert match.pairs == [(1, 0, 1.0)]

    def test_rejects_non_positive_threshold(self):
        """Test a zero threshold raises ValueError."""
        with pytest.raises(ValueError):
            greedy_match(GT4, GT4, threshold=0.0)

    def test_never_beats_optimal_assignment(self):
        """Test greedy cost is at least the optimal assignment cost on random instances."""
        rng = np.random.default_rng(0)
        for _ in range(1000):
            gt = rng.uniform(0, 20, size=(rng.integers(1, 7), 2))
            pred = rng.uniform(0, 20, size=(rng.integers(1, 7), 2))
            match = greedy_match(gt.tolist(), pred.tolist(), threshold=100.0)
            dist = cdist(gt, pred)
            rows, cols = linear_sum_assignment(dist)
            assert len(match.pairs) == min(len(gt), len(pred))
            assert match.total_cost >= dist[rows, cols].sum() - 1e-9

    def test_optimal_on_unambiguous_instances(self):
        """Test greedy equals the optimum when each truth has exactly one nearby prediction."""
        rng = np.random.default_rng(1)
        for _ in range(200):
            n = int(rng.integers(1, 7))
            gt = np.array([[20.0 * k + 5.0, 20.0 * k + 5.0] for k in range(n)])
            pred = gt + rng.uniform(-2, 2, size=gt.shape)
            order = rng.permutation(n)
            match = greedy_match(gt.tolist(), pred[order].tolist(), threshold=5.0)
            dist = cdist(gt, pred[order])
            rows, cols = linear_sum_assignment(dist)
            assert match.total_cost == pytest.approx(dist[rows, cols].sum())
            assert sorted((g, p) for g, p, _ in match.pairs) == sorted(zip(rows.tolist(), cols.tolist()))

    def test_permutation_invariant_counts(self):
        """Test shuffling either list leaves miss and false-alarm counts unchanged."""
        rng = np.random.default_rng(2)
        gt = rng.uniform(0, 30, size=(5, 2)).tolist()
        pred = rng.uniform(0, 30, size=(6, 2)).tolist()
        base = greedy_match(gt, pred, threshold=6.0)
        shuffled = greedy_match(gt[::-1], pred[::-1], threshold=6.0)
        assert len(base.misses) == len(shuffled.misses)
        assert len(base.false_alarms) == len(shuffled.false_alarms)
        assert base.total_cost == pytest.approx(shuffled.total_cost)


class TestRates:
    """Tests for the intruder-count false alarm denominator."""

    def test_divides_by_intruders(self):
        """Test 2 false alarms over 4 intruders rate 0.5."""
        preds = [(x + 1.0, y) for x, y in GT4] + [(90.0, 90.0), (95.0, 5.0)]
        match = greedy_match(GT4, preds, threshold=5.0)
        assert compute_rates(match, 4, 6, DENOMINATOR_INTRUDERS) == pytest.approx((0.0, 0.5))

    def test_capped_at_one(self):
        """Test more false alarms than intruders rate 1."""
        match = greedy_match([(0.0, 0.0)], [(50.0, 50.0), (60.0, 60.0), (70.0, 70.0)], threshold=5.0)
        assert compute_rates(match, 1, 3, DENOMINATOR_INTRUDERS) == (1.0, 1.0)

    def test_no_intruders(self):
        """Test any false alarm in an empty field rates 1."""
        match = greedy_match([], [(5.0, 5.0)], threshold=5.0)
        assert compute_rates(match, 0, 1, DENOMINATOR_INTRUDERS) == (0.0, 1.0)

    def test_unknown_denominator(self):
        """Test an unknown denominator name raises ValueError."""
        with pytest.raises(ValueError):
            compute_rates(greedy_match([], [], 5.0), 0, 0, "sensors")


class TestErrors:
    """Tests for localization and power errors."""

    def test_three_four_five(self):
        """Test a 3-4-5 offset at 10 m per pixel is 50 m."""
        match = greedy_match([(10.0, 10.0)], [(13.0, 14.0)], threshold=6.0, pixel_size=10.0)
        assert localization_error(match) == pytest.approx(50.0)

    def test_perfect_predictions(self):
        """Test exact predictions have zero error."""
        assert localization_error(greedy_match(GT4, GT4, 5.0)) == 0.0

    def test_no_matches(self):
        """Test an empty match has no localization error."""
        assert localization_error(greedy_match([(0.0, 0.0)], [], 5.0)) is None

    def test_power_error(self):
        """Test |2.4 - 3| is 0.6 dB."""
        match = greedy_match([(0.0, 0.0)], [(0.0, 0.0)], 5.0)
        assert power_error(match, [3.0], [2.4]) == pytest.approx(0.6)
        assert power_error(match, [3.0], [3.0]) == 0.0


class TestDatasetEvaluation:
    """Tests for aggregation over samples and sweep cells."""

    def test_oracle_pipeline(self):
        """Test ground truth passed through scores zero error."""
        samples = [
            make_sample("a", [(10.5, 10.5, 1.0), (60.2, 30.1, 4.0)]),
            make_sample("b", [(80.0, 20.0, 2.5)], authorized=[(40.5, 40.5, 3.0)]),
        ]
        reports, results = evaluate_dataset(OraclePipeline(), samples, threshold=5.0, pixel_size=10.0)
        assert len(reports) == 1
        report = reports[0]
        assert report.localization_error_m == 0.0
        assert report.miss_rate == 0.0 and report.false_alarm_rate == 0.0
        assert report.power_error_db == 0.0
        assert report.num_samples == 2
        assert [r.num_gt for r in results] == [2, 1]

    def test_macro_average(self):
        """Test rates average per sample while errors pool over pairs."""
        samples = [
            make_sample("a", [(10.0, 10.0, 0.0), (30.0, 30.0, 0.0)]),
            make_sample("b", [(50.0, 50.0, 0.0)]),
        ]
        pipeline = FixedPipeline({
            "a": Prediction(locations=[(10.0, 11.0)]),
            "b": Prediction(locations=[(50.0, 52.0)]),
        })
        report = evaluate_dataset(pipeline, samples, threshold=5.0, pixel_size=10.0)[0][0]
        assert report.miss_rate == pytest.approx(0.25)
        assert report.false_alarm_rate == 0.0
        assert report.localization_error_m == pytest.approx(15.0)
        assert report.power_error_db is None

    def test_num_tx_cells_from_intruder_count(self):
        """Test a mixed dataset groups by intruder count and reports exactly the requested cells."""
        samples = [
            make_sample("a", [(10.0, 10.0, 0.0)]),
            make_sample("b", [(10.0, 10.0, 0.0), (50.0, 50.0, 0.0)]),
            make_sample("c", [(20.0, 20.0, 0.0)]),
            make_sample("d", [(10.0, 10.0, 0.0)] * 4),
        ]
        reports, _ = evaluate_dataset(
            OraclePipeline(), samples, threshold=5.0, pixel_size=10.0,
            sweep_param=SWEEP_NUM_TX, sweep_values=[1, 2, 3]
        )
        assert [r.sweep_value for r in reports] == [1.0, 2.0, 3.0]
        assert [r.num_samples for r in reports] == [2, 1, 0]
        assert all(r.sweep_param == SWEEP_NUM_TX for r in reports)

    def test_dataset_sweep_value_wins(self):
        """Test samples tagged by their dataset group under that value."""
        samples = [make_sample(str(k), [(10.0, 10.0, 0.0)], sweep_value=0.04) for k in range(3)]
        reports, _ = evaluate_dataset(OraclePipeline(), samples, 5.0, 10.0, sweep_param="density")
        assert len(reports) == 1 and reports[0].sweep_value == 0.04

    def test_workers_do_not_change_results(self):
        """Test threaded evaluation matches sequential evaluation."""
        samples = [make_sample(str(k), [(10.0 + k, 10.0, 0.0)]) for k in range(8)]
        seq = evaluate_dataset(OraclePipeline(), samples, 5.0, 10.0, workers=1)[1]
        par = evaluate_dataset(OraclePipeline(), samples, 5.0, 10.0, workers=4)[1]
        assert [r.sample_id for r in seq] == [r.sample_id for r in par]
        assert [r.miss_rate for r in seq] == [r.miss_rate for r in par]

    def test_latency_recorded(self):
        """Test each sample gets a non-negative latency."""
        _, results = evaluate_dataset(OraclePipeline(), [make_sample("a", [(1.0, 1.0, 0.0)])], 5.0, 10.0)
        assert results[0].latency_s >= 0.0

    def test_evaluate_sample_counts(self):
        """Test the per-sample record carries counts and errors."""
        result = evaluate_sample(
            "s", [(0.0, 0.0), (20.0, 20.0)],
            Prediction(locations=[(0.0, 3.0), (80.0, 80.0)], powers=[1.0, 2.0]),
            threshold=5.0, pixel_size=2.0, gt_powers=[1.5, 0.0]
        )
        assert (result.misses, result.false_alarms) == (1, 1)
        assert result.localization_errors_m == [6.0]
        assert result.power_errors_db == [0.5]

    def test_empty_aggregate(self):
        """Test aggregating no results gives a zero-sample report."""
        report = aggregate_results([], sweep_param=SWEEP_NUM_TX, sweep_value=7.0)
        assert report.num_samples == 0 and report.localization_error_m is None


class TestReportFiles:
    """Tests for report and dump files."""

    def test_files(self):
        """Test JSON, CSV and JSONL outputs carry every cell and sample."""
        samples = [make_sample(str(k), [(10.0, 10.0, 1.0)]) for k in range(3)]
        reports, results = evaluate_dataset(OraclePipeline(), samples, 5.0, 10.0)
        with TemporaryDirectory() as tmpdir:
            root = Path(tmpdir)
            write_reports_json(reports, root / "reports.json")
            write_reports_csv(reports, root / "reports.csv")
            write_sample_dumps(results, root / "samples.jsonl")

            assert read_reports(root / "reports.json") == reports
            with open(root / "reports.csv", newline='') as f:
                rows = list(csv.reader(f))
            assert tuple(rows[0]) == EvalReport.CSV_COLUMNS
            assert len(rows) == 2
            assert len(read_sample_dumps(root / "samples.jsonl")) == 3
