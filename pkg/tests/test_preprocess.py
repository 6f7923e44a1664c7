import numpy as np
import pandas as pd
import pytest

from modules.preprocess.cleaner import (
    handle_missing,
    load_prepared_data,
    one_hot_encode,
    preprocess_table,
    save_prepared_data,
    standardize,
)
from modules.preprocess.splitter import split_stratified
from modules.preprocess.table import CATEGORICAL, CONTINUOUS, RawTable, read_raw_csv


class TestHandleMissing:
    def test_drops_sparse_columns_then_rows(self):
        frame = pd.DataFrame({
            "a": [1.0, 2.0, np.nan, 4.0, 5.0],
            "b": [np.nan, np.nan, np.nan, np.nan, 1.0],
            "c": ["x", None, "y", "x", "y"],
        })
        table = RawTable(frame, {"a": CONTINUOUS, "b": CONTINUOUS, "c": CATEGORICAL})
        cleaned = handle_missing(table, max_missing_fraction=0.7)
        assert cleaned.columns == ["a", "c"]
        assert cleaned.n_rows == 4
        # Missing categorical entries survive for the Missing indicator
        assert cleaned.frame["c"].isna().sum() == 1

    def test_is_a_fixed_point(self, mixed_raw):
        once = handle_missing(mixed_raw)
        twice = handle_missing(once)
        pd.testing.assert_frame_equal(once.frame, twice.frame)

    def test_all_rows_deleted(self):
        frame = pd.DataFrame({"a": [np.nan, 1.0], "b": [1.0, np.nan]})
        table = RawTable(frame, {"a": CONTINUOUS, "b": CONTINUOUS})
        with pytest.raises(ValueError, match="all rows deleted"):
            handle_missing(table)


class TestOneHotEncode:
    def test_columns_sum_to_one(self):
        frame, group = one_hot_encode(pd.Series(["b", "a", None, "b"]), name="f")
        assert list(frame.columns) == ["f=a", "f=b", "f=Missing"]
        np.testing.assert_array_equal(frame.to_numpy().sum(axis=1), np.ones(4))
        assert group.labels == ["a", "b", "Missing"]

    def test_high_cardinality_gets_other(self):
        values = [f"v{i:02d}" for i in range(12)] + ["v00", "v01"]
        frame, group = one_hot_encode(pd.Series(values), name="f")
        assert len(group.labels) == 10
        assert group.labels[-1] == "Other"
        np.testing.assert_array_equal(frame.to_numpy().sum(axis=1), np.ones(len(values)))

    def test_all_missing_column(self):
        frame, group = one_hot_encode(pd.Series([None, None, None]), name="f")
        assert group.all_missing
        assert list(frame.columns) == ["f=Missing"]

    def test_empty_column(self):
        with pytest.raises(ValueError, match="no data"):
            one_hot_encode(pd.Series([], dtype=object), name="f")


class TestStandardize:
    def test_zero_mean_unit_variance(self):
        values, stats = standardize([1.0, 2.0, 3.0, 4.0])
        assert abs(values.mean()) < 1e-12
        assert abs(values.std() - 1.0) < 1e-12
        assert not stats["constant"]

    def test_constant_column_becomes_zeros(self):
        values, stats = standardize([5.0, 5.0, 5.0])
        np.testing.assert_array_equal(values, np.zeros(3))
        assert stats["constant"]


class TestSplit:
    def test_partition_of_rows(self):
        train, val, test = split_stratified(101, seed=4)
        combined = np.concatenate([train, val, test])
        np.testing.assert_array_equal(np.sort(combined), np.arange(101))
        assert len(train) == 61 and len(val) == 20 and len(test) == 20

    def test_stratified_class_shares(self):
        labels = np.array([0] * 80 + [1] * 20)
        train, val, test = split_stratified(100, labels, seed=2)
        assert np.sum(labels[train] == 1) == 12
        assert np.sum(labels[val] == 1) == 4
        assert np.sum(labels[test] == 1) == 4

    def test_deterministic_in_seed(self):
        first = split_stratified(50, seed=9)
        second = split_stratified(50, seed=9)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a, b)

    def test_rejects_tiny_class(self):
        with pytest.raises(ValueError, match="class too small to stratify"):
            split_stratified(5, [0, 0, 0, 0, 1])

    def test_rejects_bad_ratios(self):
        with pytest.raises(ValueError, match="ratios must be positive and sum to 1"):
            split_stratified(10, ratios=(0.5, 0.5, 0.5))


class TestPreprocessTable:
    def test_classification_table(self, mixed_raw):
        data = preprocess_table(mixed_raw, target="label", task="classification", seed=1)
        table = data.table
        assert table.feature_names == ["age", "income", "city"]
        assert table.columns[:2] == ["age", "income"]
        assert table.columns[2:] == ["city=oslo", "city=paris", "city=rome", "city=Missing"]
        assert table.groups == [[0], [1], [2, 3, 4, 5]]
        assert data.stats["rows_removed"] == 2
        assert data.stats["class_names"] == ["no", "yes"]
        assert set(np.unique(data.target)) <= {0, 1}

    def test_standardization_fitted_on_train(self, mixed_raw):
        data = preprocess_table(mixed_raw, target="label", task="classification", seed=1)
        train_age = data.table.data[data.splits["train"], 0]
        assert abs(train_age.mean()) < 1e-9
        assert abs(train_age.std() - 1.0) < 1e-9

    def test_missing_target_column(self, mixed_raw):
        with pytest.raises(ValueError, match="Target column price not found"):
            preprocess_table(mixed_raw, target="price")

    def test_round_trip_on_disk(self, mixed_raw, tmp_path):
        data = preprocess_table(mixed_raw, target="label", task="classification", seed=1)
        table_path, split_path = save_prepared_data(data, tmp_path / "table.csv")
        assert split_path.name == "table_splits.json"
        loaded = load_prepared_data(table_path)
        np.testing.assert_allclose(loaded.table.data, data.table.data)
        np.testing.assert_array_equal(loaded.target, data.target)
        assert loaded.table.groups == data.table.groups
        for name in ("train", "val", "test"):
            np.testing.assert_array_equal(loaded.splits[name], data.splits[name])


class TestReadRawCsv:
    def test_markers_and_kind_inference(self, tmp_path):
        path = tmp_path / "raw.csv"
        path.write_text("x,color,y\n1.5,red,3\nNA,blue,4\n2.5,,5\n", encoding="utf-8")
        raw = read_raw_csv(path)
        assert raw.kinds == {"x": CONTINUOUS, "color": CATEGORICAL, "y": CONTINUOUS}
        assert raw.frame["x"].isna().sum() == 1
        assert raw.frame["color"].isna().sum() == 1

    def test_declared_kind_wins(self, tmp_path):
        path = tmp_path / "raw.csv"
        path.write_text("zip,y\n10115,1\n75001,2\n", encoding="utf-8")
        raw = read_raw_csv(path, kinds={"zip": CATEGORICAL})
        assert raw.kinds["zip"] == CATEGORICAL
