import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from guidedforest.data import (
    CsvSchema,
    Dataset,
    SyntheticSpec,
    load_csv,
    load_feature_matrix,
    simulate_dataset,
    write_csv,
)
from guidedforest.errors import CsvParseError, MissingValueError, SingleClassError
from conftest import make_dataset


class TestDataset:
    def test_validation(self):
        with pytest.raises(ValueError):
            make_dataset([[1.0, np.nan]], [0])
        with pytest.raises(ValueError):
            Dataset(values=np.ones((2, 2)), labels=np.array([0, 5]), n_classes=2)
        with pytest.raises(ValueError):
            Dataset(values=np.ones((2, 2)), labels=np.array([0]), n_classes=2)

    def test_take_and_select(self):
        data = make_dataset([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]], [0, 1, 0],
                            feature_names=("a", "b"))
        sub = data.take([0, 2])
        assert sub.n_rows == 2 and sub.labels.tolist() == [0, 0]
        cols = data.select_features([1])
        assert cols.feature_names == ("b",)
        assert cols.values.tolist() == [[2.0], [4.0], [6.0]]


class TestSimulate:
    def test_even_rows_split_exactly_in_half(self):
        data = simulate_dataset(SyntheticSpec(seed=1))
        assert data.n_rows == 500 and data.n_features == 500
        counts = np.bincount(data.labels)
        assert counts.tolist() == [250, 250]

    def test_labels_consistent_with_stored_matrix(self):
        # recompute the threshold rule independently from the stored values
        spec = SyntheticSpec(n_rows=101, n_features=30, relevant_features=(2, 9), seed=3)
        data = simulate_dataset(spec)
        score = data.values[:, 2] + data.values[:, 9]
        mid = np.sort(score)[score.size // 2]  # odd n: the middle order statistic
        assert np.array_equal(data.labels, (score > mid).astype(np.int64))

    def test_pure_function_of_spec(self):
        spec = SyntheticSpec(n_rows=40, n_features=25, seed=9)
        a, b = simulate_dataset(spec), simulate_dataset(spec)
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.labels, b.labels)

    def test_different_seeds_differ(self):
        a = simulate_dataset(SyntheticSpec(n_rows=40, n_features=25, seed=1))
        b = simulate_dataset(SyntheticSpec(n_rows=40, n_features=25, seed=2))
        assert not np.array_equal(a.values, b.values)

    def test_value_range_respected(self):
        data = simulate_dataset(SyntheticSpec(n_rows=50, n_features=22, value_range=(0.0, 2.0), seed=4))
        assert data.values.min() >= 0.0 and data.values.max() <= 2.0

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SyntheticSpec(n_features=10)  # default relevant feature 20 out of range
        with pytest.raises(ValueError):
            SyntheticSpec(relevant_features=(3, 3), n_features=30)
        with pytest.raises(ValueError):
            SyntheticSpec(value_range=(1.0, -1.0))


class TestLoadCsv:
    def test_first_appearance_label_mapping(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,y,cls\n1,2,a\n3,4,b\n5,6,a\n")
        data = load_csv(path)
        assert data.n_classes == 2
        assert data.labels.tolist() == [0, 1, 0]
        assert data.label_names == ("a", "b")
        assert data.feature_names == ("x", "y")
        assert data.label_column_name == "cls"

    def test_parse_error_names_row_and_column(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,y,cls\n1,2,a\n3,oops,b\n")
        with pytest.raises(CsvParseError) as err:
            load_csv(path)
        assert err.value.row == 3 and err.value.column == 2

    def test_missing_value(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,y,cls\n1,,a\n3,4,b\n")
        with pytest.raises(MissingValueError):
            load_csv(path)

    def test_non_finite_rejected(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,y,cls\n1,inf,a\n3,4,b\n")
        with pytest.raises(CsvParseError):
            load_csv(path)

    def test_single_class_error(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,y,cls\n1,2,a\n3,4,a\n")
        with pytest.raises(SingleClassError):
            load_csv(path)

    def test_label_column_by_name_and_index(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("cls,x,y\na,1,2\nb,3,4\n")
        by_name = load_csv(path, CsvSchema(label_column="cls"))
        by_index = load_csv(path, CsvSchema(label_column=0))
        assert by_name.values.tolist() == by_index.values.tolist() == [[1, 2], [3, 4]]
        assert by_name.feature_names == ("x", "y")

    def test_headerless_and_delimiter(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("1;2;a\n3;4;b\n")
        data = load_csv(path, CsvSchema(header=False, delimiter=";"))
        assert data.n_rows == 2
        assert data.feature_names == ("f0", "f1")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("")
        with pytest.raises(CsvParseError):
            load_csv(path)

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,y,cls\n1,2,a\n3,4\n")
        with pytest.raises(CsvParseError) as err:
            load_csv(path)
        assert err.value.row == 3

    def test_missing_label_column(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("x,y,cls\n1,2,a\n")
        with pytest.raises(CsvParseError):
            load_csv(path, CsvSchema(label_column="nope"))


class TestRoundTrip:
    def test_awkward_floats_survive_exactly(self, tmp_path):
        values = np.array(
            [
                [0.1, 1 / 3, 1e-300],
                [-2.5e300, 7.0, 0.30000000000000004],
                [1.0000000000000002, -0.0, 123456789.123456789],
                [5e-324, 1e16 + 2, -1 / 7],
            ]
        )
        data = make_dataset(values, [0, 1, 0, 1], label_names=("neg", "pos"))
        path = tmp_path / "d.csv"
        write_csv(data, path)
        again = load_csv(path)
        assert np.array_equal(again.values, data.values)
        assert again.decoded_labels() == data.decoded_labels()

    def test_synthetic_round_trip(self, tmp_path):
        data = simulate_dataset(SyntheticSpec(n_rows=30, n_features=25, seed=5))
        path = tmp_path / "d.csv"
        write_csv(data, path)
        again = load_csv(path)
        assert np.array_equal(again.values, data.values)
        assert again.decoded_labels() == data.decoded_labels()
        assert again.feature_names == data.feature_names
        assert again.label_column_name == data.label_column_name

    @settings(max_examples=30, deadline=None)
    @given(
        st.lists(
            st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=2, max_size=2),
            min_size=2,
            max_size=6,
        )
    )
    def test_round_trip_any_finite_values(self, tmp_path_factory, cells):
        labels = [i % 2 for i in range(len(cells))]
        data = make_dataset(cells, labels)
        path = tmp_path_factory.mktemp("rt") / "d.csv"
        write_csv(data, path)
        again = load_csv(path)
        assert np.array_equal(again.values, data.values)
        assert again.decoded_labels() == data.decoded_labels()


class TestLoadFeatureMatrix:
    def test_all_columns_are_features(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b,c\n1,2,3\n4,5,6\n")
        matrix, names = load_feature_matrix(path)
        assert matrix.tolist() == [[1, 2, 3], [4, 5, 6]]
        assert names == ("a", "b", "c")

    def test_text_cell_rejected(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b\n1,x\n")
        with pytest.raises(CsvParseError):
            load_feature_matrix(path)
