import math

import numpy as np
import pandas as pd
import pytest

from src.core.config import DatasetDescriptor, SplitSpec
from src.core.data_pipeline import (
    GeoSeriesDataset,
    PreparedSplits,
    chronological_split,
    fit_normalizer,
    load_dataset,
    make_windows,
    prepare_splits,
    split_lengths,
    window_count,
)
from src.core.errors import DataValidationError

COORDS_CSV = "node,lat,lon\n0,37.0,118.0\n1,37.5,118.5\n"
VALUES_CSV = "date,node_0,node_1\n2020-01-01,1.0,2.0\n2020-01-02,1.5,2.5\n2020-01-03,2.0,3.0\n"
NAN_CELL_CSV = "date,node_0,node_1\n2020-01-01,1.0,2.0\n2020-01-02,1.5,\n2020-01-03,2.0,3.0\n"


def _descriptor(tmp_path, values_text, coords_text=COORDS_CSV, **expected):
    (tmp_path / "values.csv").write_text(values_text)
    if coords_text is not None:
        (tmp_path / "coords.csv").write_text(coords_text)
    return DatasetDescriptor(
        name="toy", values_path=tmp_path / "values.csv", coords_path=tmp_path / "coords.csv", **expected
    )


def _series(values):
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    return GeoSeriesDataset(
        values=values,
        timestamps=pd.date_range("2020-01-01", periods=len(values), freq="D"),
        coords=np.arange(2 * values.shape[1], dtype=np.float64).reshape(-1, 2),
        name="toy",
        node_names=tuple(f"node_{i}" for i in range(values.shape[1])),
    )


def test_load_valid_dataset(tmp_path):
    dataset = load_dataset(_descriptor(tmp_path, VALUES_CSV, expected_T=3, expected_N=2))
    assert dataset.values.shape == (3, 2)
    assert dataset.node_names == ("node_0", "node_1")
    assert dataset.coords.shape == (2, 2)
    assert dataset.timestamps[0] == pd.Timestamp("2020-01-01")


def test_load_from_descriptor_file(synthetic_descriptor):
    dataset = load_dataset(synthetic_descriptor)
    assert dataset.name == "synthetic"
    assert (dataset.num_steps, dataset.num_nodes) == (120, 4)


def test_missing_cell_is_reported_by_row_and_column(tmp_path):
    with pytest.raises(DataValidationError, match=r"\(row 1, col 1\)") as excinfo:
        load_dataset(_descriptor(tmp_path, NAN_CELL_CSV))
    assert excinfo.value.cells == [(1, 1)]


def test_short_interior_gap_is_interpolated_when_enabled(tmp_path):
    dataset = load_dataset(_descriptor(tmp_path, NAN_CELL_CSV), interpolate_gaps=True)
    assert dataset.values[1, 1] == pytest.approx(2.5)


def test_gap_at_series_edge_is_rejected(tmp_path):
    text = "date,node_0,node_1\n2020-01-01,1.0,2.0\n2020-01-02,1.5,2.5\n2020-01-03,2.0,\n"
    with pytest.raises(DataValidationError, match="edge"):
        load_dataset(_descriptor(tmp_path, text), interpolate_gaps=True)


def test_long_gap_is_rejected(tmp_path):
    rows = ["date,node_0,node_1"]
    for day, value in enumerate(["1.0", "", "", "", "5.0"], start=1):
        rows.append(f"2020-01-0{day},{day}.0,{value}")
    with pytest.raises(DataValidationError, match="exceeds"):
        load_dataset(_descriptor(tmp_path, "\n".join(rows) + "\n"), interpolate_gaps=True)


def test_infinite_value_is_rejected(tmp_path):
    text = VALUES_CSV.replace("2.5", "inf")
    with pytest.raises(DataValidationError) as excinfo:
        load_dataset(_descriptor(tmp_path, text))
    assert excinfo.value.cells == [(1, 1)]


def test_ragged_row_names_the_line(tmp_path):
    text = VALUES_CSV.replace("2020-01-02,1.5,2.5", "2020-01-02,1.5,2.5,9.9")
    with pytest.raises(DataValidationError, match=r"values\.csv:3"):
        load_dataset(_descriptor(tmp_path, text))


def test_short_row_names_the_line(tmp_path):
    text = VALUES_CSV.replace("2020-01-03,2.0,3.0", "2020-01-03,2.0")
    with pytest.raises(DataValidationError, match=r"values\.csv:4: ragged row with 2 fields"):
        load_dataset(_descriptor(tmp_path, text))


def test_sub_day_stride_is_rejected(tmp_path):
    text = (
        "date,node_0,node_1\n2020-01-01 00:00,1.0,2.0\n"
        "2020-01-02 12:00,1.5,2.5\n2020-01-03 12:00,2.0,3.0\n"
    )
    with pytest.raises(DataValidationError, match="1-day stride.*row 1"):
        load_dataset(_descriptor(tmp_path, text))


def test_date_gap_is_rejected(tmp_path):
    text = VALUES_CSV.replace("2020-01-03", "2020-01-05")
    with pytest.raises(DataValidationError, match="1-day stride"):
        load_dataset(_descriptor(tmp_path, text))


def test_unordered_dates_are_rejected(tmp_path):
    text = VALUES_CSV.replace("2020-01-03", "2020-01-01")
    with pytest.raises(DataValidationError, match="strictly increasing"):
        load_dataset(_descriptor(tmp_path, text))


def test_missing_coords_file_names_the_path(tmp_path):
    descriptor = _descriptor(tmp_path, VALUES_CSV, coords_text=None)
    with pytest.raises(FileNotFoundError, match="coords.csv"):
        load_dataset(descriptor)


def test_coords_must_cover_every_column(tmp_path):
    with pytest.raises(DataValidationError, match="exactly the 2 value columns"):
        load_dataset(_descriptor(tmp_path, VALUES_CSV, coords_text="node,lat,lon\n0,37.0,118.0\n"))


def test_duplicate_coordinates_are_rejected(tmp_path):
    coords = "node,lat,lon\n0,37.0,118.0\n1,37.0,118.0\n"
    with pytest.raises(DataValidationError, match="unique"):
        load_dataset(_descriptor(tmp_path, VALUES_CSV, coords_text=coords))


def test_expected_shape_is_enforced(tmp_path):
    with pytest.raises(DataValidationError, match="expected N=136"):
        load_dataset(_descriptor(tmp_path, VALUES_CSV, expected_N=136))


def test_fit_normalizer_uses_population_std():
    stats = fit_normalizer(np.array([1.0, 2.0, 3.0]))
    assert stats.mean == pytest.approx(2.0)
    assert stats.std == pytest.approx(math.sqrt(2.0 / 3.0), abs=1e-4)


def test_constant_training_slice_has_zero_variance():
    with pytest.raises(DataValidationError, match="zero variance"):
        fit_normalizer(np.full((10, 3), 5.0))


def test_normalizer_round_trip():
    values = np.random.default_rng(0).normal(12.0, 4.0, size=(50, 7))
    stats = fit_normalizer(values)
    np.testing.assert_allclose(stats.inverse_transform(stats.transform(values)), values, atol=1e-6)


@pytest.mark.parametrize("length, expected", [(2189, 2166), (24, 1), (100, 77)])
def test_window_count(length, expected):
    assert window_count(length, 12, 12) == expected


def test_too_short_partition_names_required_length():
    with pytest.raises(DataValidationError, match="at least 24"):
        window_count(23, 12, 12)


@pytest.mark.parametrize(
    "num_steps, expected",
    [(100, (70, 10, 20)), (101, (71, 10, 20)), (2189, (1533, 218, 438))],
)
def test_split_lengths(num_steps, expected):
    assert split_lengths(num_steps, SplitSpec()) == expected


def test_chronological_split_is_contiguous():
    dataset = _series(np.arange(100.0))
    train, val, test = chronological_split(dataset, SplitSpec())
    joined = np.concatenate([train.values, val.values, test.values])
    np.testing.assert_array_equal(joined, dataset.values)
    assert train.timestamps[-1] < val.timestamps[0] < test.timestamps[0]


def test_normalizer_sees_only_training_partition():
    values = np.concatenate([np.random.default_rng(1).normal(10.0, 1.0, size=70), np.full(30, 1000.0)])
    splits = prepare_splits(_series(values), SplitSpec())
    assert splits.norm_stats.mean == pytest.approx(values[:70].mean())
    assert splits.norm_stats.std == pytest.approx(values[:70].std())


def test_windows_align_inputs_and_targets():
    data = np.arange(30 * 3, dtype=np.float32).reshape(30, 3)
    batch = next(iter(make_windows(data, 12, 4, batch_size=5)))
    assert batch.inputs.shape == (5, 1, 3, 12)
    assert batch.targets.shape == (5, 1, 3, 4)
    assert batch.start_indices == [0, 1, 2, 3, 4]
    np.testing.assert_array_equal(batch.inputs[2, 0].numpy(), data[2:14].T)
    np.testing.assert_array_equal(batch.target_steps()[2].numpy(), data[14:18])


def test_every_window_is_visited_once():
    loader = make_windows(np.zeros((40, 2)), 12, 12, batch_size=4, shuffle=True, seed=3)
    starts = [s for batch in loader for s in batch.start_indices]
    assert sorted(starts) == list(range(window_count(40, 12, 12)))


def test_shuffled_order_is_seeded():
    data = np.zeros((60, 2))
    first = [b.start_indices for b in make_windows(data, 12, 12, batch_size=8, shuffle=True, seed=7)]
    second = [b.start_indices for b in make_windows(data, 12, 12, batch_size=8, shuffle=True, seed=7)]
    assert first == second


def test_prepared_splits_survive_save_and_load(tmp_path, synthetic_splits):
    synthetic_splits.save(tmp_path / "cache")
    restored = PreparedSplits.load(tmp_path / "cache", "synthetic")
    assert restored.norm_stats == synthetic_splits.norm_stats
    assert restored.splits["test"].node_names == synthetic_splits.splits["test"].node_names
    for split in ("train", "val", "test"):
        np.testing.assert_array_equal(restored.splits[split].values, synthetic_splits.splits[split].values)
        assert (restored.splits[split].timestamps == synthetic_splits.splits[split].timestamps).all()


def test_summary_reports_shape_and_dates(synthetic_splits):
    summary = synthetic_splits.summary()
    assert summary["T"] == 120
    assert summary["N"] == 4
    assert summary["split_lengths"] == {"train": 84, "val": 12, "test": 24}
    assert summary["date_range"] == ["2015-01-01", "2015-04-30"]


def test_unknown_split_is_rejected(synthetic_splits):
    with pytest.raises(DataValidationError, match="unknown split"):
        synthetic_splits.normalized("holdout")
