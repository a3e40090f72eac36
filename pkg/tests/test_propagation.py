"""
Tests for RSS simulation.

Tests include:
- Log-distance path loss and its distance clamp
- Linear-domain aggregation
- Per-sensor reading maps (superposition, noise floor, determinism)
- Table-driven path loss
"""

import json
import math
import sys
from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from spectrum_guard.exceptions import InputDomainError, ShapeMismatchError
from spectrum_guard.models import (
    FieldConfig, PathLossModel, RadioEnvironment, Scene, Transmitter
)
from spectrum_guard.utilities.propagation import (
    TablePathLoss,
    aggregate_power,
    aggregate_power_matrix,
    compute_rss_map,
    path_loss,
    received_power,
    transmitter_contributions,
)
from spectrum_guard.utilities.scene_sampler import sample_scene


def quiet_env(noise_floor: float = -80.0) -> RadioEnvironment:
    return RadioEnvironment(model=PathLossModel(shadow_sigma=0.0), noise_floor=noise_floor, pixel_size=10.0)


class TestPathLoss:
    """Tests for the log-distance model."""

    def test_known_distance(self):
        """Test 10 m at alpha 3.5 costs 35 dB."""
        assert path_loss(PathLossModel(shadow_sigma=0.0), 10.0) == pytest.approx(35.0)

    def test_short_distances_clamp_to_reference(self):
        """Test distances below 1 m lose nothing."""
        model = PathLossModel(shadow_sigma=0.0)
        assert path_loss(model, 0.0) == 0.0
        assert path_loss(model, 0.4) == 0.0

    def test_negative_distance_rejected(self):
        """Test a negative distance raises InputDomainError."""
        with pytest.raises(InputDomainError):
            path_loss(PathLossModel(), -1.0)

    def test_monotone_without_shadowing(self):
        """Test loss grows with distance when shadowing is off."""
        losses = path_loss(PathLossModel(shadow_sigma=0.0), np.array([1.0, 5.0, 50.0, 500.0]))
        assert np.all(np.diff(losses) > 0)

    def test_shadowing_is_seeded(self):
        """Test identical generators give identical shadowing."""
        model = PathLossModel(shadow_sigma=1.0)
        a = path_loss(model, np.full(20, 30.0), np.random.default_rng(3))
        b = path_loss(model, np.full(20, 30.0), np.random.default_rng(3))
        np.testing.assert_array_equal(a, b)
        assert np.std(a) > 0

    def test_received_power(self):
        """Test received power is transmit power minus loss."""
        env = quiet_env()
        assert received_power(env, 5.0, 100.0) == pytest.approx(5.0 - 70.0)


class TestAggregation:
    """Tests for linear-domain power sums."""

    def test_two_equal_sources(self):
        """Test two -50 dBm signals sum to -46.9897 dBm."""
        assert aggregate_power([-50.0, -50.0]) == pytest.approx(-46.98970004, abs=1e-6)

    def test_single_source_unchanged(self):
        """Test one signal aggregates to itself."""
        assert aggregate_power([-63.2]) == pytest.approx(-63.2)

    def test_empty_is_negative_infinity(self):
        """Test no signals give -inf."""
        assert aggregate_power([]) == float('-inf')

    def test_very_weak_sources_do_not_underflow(self):
        """Test sums of very weak signals stay finite."""
        assert aggregate_power([-400.0, -400.0]) == pytest.approx(-400.0 + 10 * math.log10(2))

    def test_matrix_matches_scalar(self):
        """Test the vectorized form agrees with the scalar form column by column."""
        rng = np.random.default_rng(0)
        levels = rng.uniform(-90, -20, size=(4, 7))
        expected = [aggregate_power(levels[:, k]) for k in range(7)]
        np.testing.assert_allclose(aggregate_power_matrix(levels, axis=0), expected)


class TestReadings:
    """Tests for per-sensor reading maps."""

    def test_colocated_sensor_reads_transmit_power(self):
        """Test a sensor at the transmitter's position reads its power."""
        scene = Scene(
            config=FieldConfig(grid_size=10),
            sensors=[(0, 0), (5, 5)],
            transmitters=[Transmitter(x=0.5, y=0.5, power=0.0)]
        )
        readings = compute_rss_map(quiet_env(), scene)
        assert readings[0] == pytest.approx(0.0)
        assert readings[1] == pytest.approx(-35.0 * math.log10(math.sqrt(50.0) * 10.0))

    def test_no_transmitters_reads_noise_floor(self):
        """Test an empty field reads the noise floor everywhere."""
        scene = Scene(config=FieldConfig(grid_size=10), sensors=[(1, 1), (2, 3)])
        np.testing.assert_array_equal(compute_rss_map(quiet_env(), scene), [-80.0, -80.0])

    def test_superposition_and_floor(self):
        """Test readings on T1 and T2 together equal the floored linear sum of each set alone."""
        env = quiet_env()
        config = FieldConfig(grid_size=30)
        rng = np.random.default_rng(0)
        cells = [(r, c) for r in range(30) for c in range(30)]
        for k in range(10_000):
            sensors = [cells[i] for i in rng.choice(len(cells), size=45, replace=False)]
            count = int(rng.integers(2, 7))
            transmitters = [
                Transmitter(x=float(x), y=float(y), power=float(p))
                for x, y, p in zip(rng.uniform(0, 30, count), rng.uniform(0, 30, count), rng.uniform(0, 5, count))
            ]
            split = int(rng.integers(1, count))
            first = Scene(config=config, sensors=sensors, transmitters=transmitters[:split])
            second = Scene(config=config, sensors=sensors, transmitters=transmitters[split:])
            union = Scene(config=config, sensors=sensors, transmitters=transmitters)
            linear = np.vstack([
                transmitter_contributions(env, first),
                transmitter_contributions(env, second),
            ])
            readings = compute_rss_map(env, union)
            assert np.all(readings >= env.noise_floor)
            expected = np.maximum(10.0 * np.log10((10.0 ** (linear / 10.0)).sum(axis=0)), env.noise_floor)
            np.testing.assert_allclose(readings, expected, atol=1e-9)
            if k % 500 == 0:
                by_sensor = [max(aggregate_power(linear[:, s]), env.noise_floor) for s in range(len(sensors))]
                np.testing.assert_allclose(readings, by_sensor, atol=1e-9)

    def test_shadowed_readings_respect_floor(self):
        """Test shadowed readings from sampled scenes never drop below the floor."""
        env = RadioEnvironment()
        config = FieldConfig(grid_size=30, sensor_density=0.05, num_intruders=(1, 6))
        for k in range(200):
            scene = sample_scene(config, np.random.default_rng(k))
            readings = compute_rss_map(env, scene, np.random.default_rng(1000 + k))
            assert readings.shape == (len(scene.sensors),)
            assert np.all(readings >= env.noise_floor)
            np.testing.assert_array_equal(readings, compute_rss_map(env, scene, np.random.default_rng(1000 + k)))

    def test_far_transmitter_is_floored(self):
        """Test a weak distant transmitter leaves only the noise floor."""
        scene = Scene(
            config=FieldConfig(grid_size=100),
            sensors=[(0, 0)],
            transmitters=[Transmitter(x=99.5, y=99.5, power=-20.0)]
        )
        assert compute_rss_map(quiet_env(), scene)[0] == -80.0

    def test_contributions_shape_without_transmitters(self):
        """Test an empty field gives a zero-row contribution matrix."""
        scene = Scene(config=FieldConfig(grid_size=10), sensors=[(1, 1), (2, 2), (3, 3)])
        assert transmitter_contributions(quiet_env(), scene).shape == (0, 3)


class TestTablePathLoss:
    """Tests for precomputed path-loss tables."""

    def _write_tables(self, root: Path, grid: int = 4) -> Path:
        entries = []
        for cell in [(0, 0), (2, 1)]:
            table = np.arange(grid * grid, dtype='<f4').reshape(grid, grid) + 10 * cell[0]
            name = f"loss_{cell[0]}_{cell[1]}.bin"
            table.tofile(root / name)
            entries.append({'tx_cell': list(cell), 'path': name})
        manifest = root / "tables.json"
        manifest.write_text(json.dumps({'name': 'toy', 'grid_size': grid, 'pixel_size': 1.0, 'entries': entries}))
        return manifest

    def test_lookup_uses_containing_cell(self):
        """Test the loss comes from the transmitter cell's table at the sensor cell."""
        with TemporaryDirectory() as tmpdir:
            provider = TablePathLoss.from_manifest(self._write_tables(Path(tmpdir)))
            loss = provider.loss_matrix(np.array([[2.7, 1.2]]), np.array([[0, 3], [3, 3]]), 1.0)
            np.testing.assert_allclose(loss, [[23.0, 35.0]])

    def test_missing_table_rejected(self):
        """Test a transmitter in a cell without a table raises InputDomainError."""
        with TemporaryDirectory() as tmpdir:
            provider = TablePathLoss.from_manifest(self._write_tables(Path(tmpdir)))
            with pytest.raises(InputDomainError):
                provider.loss_matrix(np.array([[3.5, 3.5]]), np.array([[0, 0]]), 1.0)

    def test_wrong_table_size_rejected(self):
        """Test a truncated table file raises ShapeMismatchError."""
        with TemporaryDirectory() as tmpdir:
            root = Path(tmpdir)
            manifest = self._write_tables(root)
            np.zeros(3, dtype='<f4').tofile(root / "loss_0_0.bin")
            with pytest.raises(ShapeMismatchError):
                TablePathLoss.from_manifest(manifest)

    def test_drives_reading_map(self):
        """Test a table provider plugs into compute_rss_map."""
        with TemporaryDirectory() as tmpdir:
            provider = TablePathLoss.from_manifest(self._write_tables(Path(tmpdir)))
            scene = Scene(
                config=FieldConfig(grid_size=4),
                sensors=[(0, 1)],
                transmitters=[Transmitter(x=0.1, y=0.9, power=-10.0)]
            )
            readings = compute_rss_map(quiet_env(), scene, provider=provider)
            assert readings[0] == pytest.approx(-11.0)
