"""Dataset generation, evaluation grids, and the .rfpd serialization."""

import numpy as np
import pytest
from scipy.stats import kstest

from rfsei.dataset import (Dataset, DatasetSpec, EvalGrid, build_dataset,
                           build_eval_grid, load_dataset, save_dataset,
                           nyquist_span_to_sps)
from rfsei.errors import (ChecksumError, ConfigurationError, DataFormatError,
                          TruncatedFileError, VersionMismatchError)


def small_spec(**overrides):
    base = dict(family="QAM", orders=(16,), target="gain", n_train=24,
                n_val=8, n_test=8, frame_len=96, master_seed=11,
                sps_range=(2.0, 3.0))
    base.update(overrides)
    return DatasetSpec(**base)


@pytest.fixture(scope="module")
def label_dataset():
    # big enough for distribution checks, short frames to keep it quick
    spec = DatasetSpec(family="PSK", orders=(2, 4), target="gain",
                       n_train=10_000, n_val=0, n_test=0, frame_len=32,
                       sps_range=(2.0, 2.5), master_seed=42)
    return build_dataset(spec)


class TestSpecs:
    def test_nyquist_conversion(self):
        lo, hi = nyquist_span_to_sps((1.2, 4.0), 0.35)
        assert abs(lo - 1.62) < 1e-12 and abs(hi - 5.4) < 1e-12

    def test_invalid_specs_rejected(self):
        with pytest.raises(ConfigurationError):
            small_spec(alpha_range=(-1.2, 0.9))
        with pytest.raises(ConfigurationError):
            small_spec(alpha_range=(0.5, -0.5))
        with pytest.raises(ConfigurationError):
            small_spec(n_train=0)
        with pytest.raises(ConfigurationError):
            small_spec(target="power")
        with pytest.raises(ConfigurationError):
            small_spec(orders=(5,))

    def test_grid_validation(self):
        with pytest.raises(ConfigurationError):
            EvalGrid(target="gain", grid_values=(0.2, 0.1), frames_per_value=5)
        with pytest.raises(ConfigurationError):
            EvalGrid(target="gain", grid_values=(0.0, 0.1, 0.3),
                     frames_per_value=5)
        grid = EvalGrid.evenly_spaced("gain", -0.9, 0.9, 0.05, 200)
        assert len(grid.grid_values) == 37
        assert len(grid.grid_values) * grid.frames_per_value == 7400

    def test_paper_scale_grid_counts(self):
        # endpoint-inclusive grids: 181 gain values and 201 phase values,
        # hence 181k / 201k frames at 1000 per value
        gain = EvalGrid.evenly_spaced("gain", -0.9, 0.9, 0.01, 1000)
        phase = EvalGrid.evenly_spaced("phase", -10.0, 10.0, 0.1, 1000)
        assert len(gain.grid_values) == 181
        assert len(gain.grid_values) * 1000 == 181_000
        assert len(phase.grid_values) == 201
        assert len(phase.grid_values) * 1000 == 201_000


class TestBuildDataset:
    def test_degenerate_alpha_range_gives_zero_labels(self):
        ds = build_dataset(small_spec(alpha_range=(0.0, 0.0)))
        assert np.all(ds.labels == 0.0)

    def test_label_uniformity(self, label_dataset):
        labels = label_dataset.labels.astype(np.float64)
        assert abs(labels.mean()) < 0.02
        assert labels.min() >= -0.9 and labels.max() <= 0.9
        # Kolmogorov-Smirnov uniformity at the 1% level
        stat = kstest(labels, "uniform", args=(-0.9, 1.8))
        assert stat.pvalue > 0.01

    def test_split_sizes_and_disjoint_seeds(self, label_dataset):
        spec = small_spec()
        ds = build_dataset(spec)
        assert len(ds) == spec.n_frames == 40
        assert ds.train[0].shape[0] == 24
        assert ds.val[0].shape[0] == 8
        assert ds.test[0].shape[0] == 8
        seeds = [ds.frame_seed(i) for i in range(len(ds))]
        assert len(set(seeds)) == len(seeds)

    def test_deterministic_generation(self):
        a = build_dataset(small_spec())
        b = build_dataset(small_spec())
        assert np.array_equal(a.frames, b.frames)
        assert np.array_equal(a.labels, b.labels)


class TestEvalGridBuild:
    def test_labels_are_exact_grid_values(self):
        spec = small_spec()
        grid = EvalGrid.evenly_spaced("gain", -0.2, 0.2, 0.1, 3)
        ds = build_eval_grid(spec, grid)
        assert len(ds) == 5 * 3
        expected = np.repeat(np.asarray(grid.grid_values, dtype=np.float32), 3)
        np.testing.assert_array_equal(ds.labels, expected)
        assert ds.grid == grid

    def test_target_mismatch_rejected(self):
        grid = EvalGrid.evenly_spaced("phase", -5.0, 5.0, 1.0, 2)
        with pytest.raises(ConfigurationError):
            build_eval_grid(small_spec(), grid)

    def test_grid_outside_training_range_rejected(self):
        spec = small_spec(alpha_range=(-0.3, 0.3))
        grid = EvalGrid.evenly_spaced("gain", -0.5, 0.5, 0.1, 2)
        with pytest.raises(ConfigurationError):
            build_eval_grid(spec, grid)


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        ds = build_dataset(small_spec())
        path = tmp_path / "ds.rfpd"
        save_dataset(ds, path)
        loaded = load_dataset(path)
        assert np.array_equal(loaded.frames, ds.frames)
        assert np.array_equal(loaded.labels, ds.labels)
        assert loaded.spec == ds.spec
        # saving the loaded dataset reproduces the file byte-for-byte
        path2 = tmp_path / "ds2.rfpd"
        save_dataset(loaded, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_rerun_same_spec_identical_bytes(self, tmp_path):
        p1, p2 = tmp_path / "a.rfpd", tmp_path / "b.rfpd"
        save_dataset(build_dataset(small_spec()), p1)
        save_dataset(build_dataset(small_spec()), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_grid_round_trip(self, tmp_path):
        spec = small_spec()
        grid = EvalGrid.evenly_spaced("gain", -0.1, 0.1, 0.1, 2)
        ds = build_eval_grid(spec, grid)
        path = tmp_path / "grid.rfpd"
        save_dataset(ds, path)
        assert load_dataset(path).grid == grid

    def test_corrupted_payload_checksum_error(self, tmp_path):
        path = tmp_path / "ds.rfpd"
        save_dataset(build_dataset(small_spec()), path)
        blob = bytearray(path.read_bytes())
        blob[200] ^= 0xFF
        path.write_bytes(blob)
        with pytest.raises(ChecksumError):
            load_dataset(path)

    def test_empty_file_truncation_error(self, tmp_path):
        path = tmp_path / "empty.rfpd"
        path.write_bytes(b"")
        with pytest.raises(TruncatedFileError):
            load_dataset(path)

    def test_truncated_payload_error(self, tmp_path):
        path = tmp_path / "ds.rfpd"
        save_dataset(build_dataset(small_spec()), path)
        blob = path.read_bytes()
        path.write_bytes(blob[:len(blob) // 2])
        with pytest.raises(TruncatedFileError):
            load_dataset(path)

    def test_version_mismatch_error(self, tmp_path):
        path = tmp_path / "ds.rfpd"
        save_dataset(build_dataset(small_spec()), path)
        blob = bytearray(path.read_bytes())
        blob[4] = 99          # version field follows the 4-byte magic
        path.write_bytes(blob)
        with pytest.raises(VersionMismatchError):
            load_dataset(path)

    def test_bad_magic_error(self, tmp_path):
        path = tmp_path / "ds.rfpd"
        save_dataset(build_dataset(small_spec()), path)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"NOPE"
        path.write_bytes(blob)
        with pytest.raises(DataFormatError):
            load_dataset(path)

    def test_missing_sidecar_error(self, tmp_path):
        path = tmp_path / "ds.rfpd"
        save_dataset(build_dataset(small_spec()), path)
        (tmp_path / "ds.rfpd.json").unlink()
        with pytest.raises(DataFormatError):
            load_dataset(path)
