import numpy as np
import pytest
from hypothesis import given, settings

from imputekit.dataset import (
    Categorical,
    Column,
    MaskedDataset,
    Numeric,
    as_completed,
    column_stats,
    mask_of,
    numeric_dataset,
    patterns,
    read_csv,
    write_csv,
)
from imputekit.errors import IngestionError, ParseError

from conftest import dataset_strategy, make_dataset


class TestReadCsv:
    def test_fig1_table(self, fig1_path):
        ds = read_csv(fig1_path)
        assert [type(c.kind).__name__ for c in ds.columns] == ["Numeric", "Numeric", "Categorical"]
        assert ds.columns[2].kind.levels == ("F", "M")
        assert mask_of(ds).tolist() == [[0, 1, 0], [0, 0, 1], [1, 0, 0]]
        assert ds.values[0, 0] == 33
        assert ds.values[2, 2] == 1  # "M"

    def test_no_missing_tokens(self, tmp_path):
        p = tmp_path / "full.csv"
        p.write_text("a,b\n1,2\n3,4\n")
        ds = read_csv(p)
        assert not ds.mask.any()

    def test_fully_missing_column_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b\n1,NA\n2,NA\n")
        with pytest.raises(IngestionError, match="'b'"):
            read_csv(p)

    def test_ragged_row_reports_row_number(self, tmp_path):
        p = tmp_path / "ragged.csv"
        p.write_text("a,b\n1,2\n3\n")
        with pytest.raises(ParseError, match="row 2"):
            read_csv(p)

    def test_empty_string_is_missing(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("a,b\n1,\n2,5\n")
        ds = read_csv(p)
        assert ds.mask[0, 1] and not ds.mask[1, 1]

    def test_schema_hint_unknown_level(self, tmp_path):
        p = tmp_path / "hint.csv"
        p.write_text("g\nF\nX\n")
        with pytest.raises(IngestionError, match="unknown level"):
            read_csv(p, schema_hint={"g": Categorical(("F", "M"))})

    def test_schema_hint_forces_categorical(self, tmp_path):
        p = tmp_path / "ints.csv"
        p.write_text("code\n2\n3\n2\n")
        ds = read_csv(p)
        assert isinstance(ds.columns[0].kind, Numeric)
        ds2 = read_csv(p, schema_hint={"code": "categorical"})
        assert ds2.columns[0].kind.levels == ("2", "3")

    def test_numeric_detection_rejects_nonfinite_tokens(self, tmp_path):
        p = tmp_path / "inf.csv"
        p.write_text("x\n1.5\ninf\n")
        ds = read_csv(p)
        assert isinstance(ds.columns[0].kind, Categorical)

    def test_duplicate_header_rejected(self, tmp_path):
        p = tmp_path / "dup.csv"
        p.write_text("a,a\n1,2\n")
        with pytest.raises(IngestionError, match="duplicate"):
            read_csv(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            read_csv(tmp_path / "nope.csv")


class TestMaskOf:
    def test_fig2_pattern(self):
        vals = np.array([[1.0, 2.0, 3.0], [np.nan, 5.0, 6.0], [np.nan, np.nan, 9.0]])
        ds = numeric_dataset(vals)
        assert mask_of(ds).tolist() == [[0, 0, 0], [1, 0, 0], [1, 1, 0]]

    def test_complete(self):
        ds = numeric_dataset(np.ones((3, 2)))
        assert mask_of(ds).sum() == 0

    def test_all_missing_row(self):
        vals = np.array([[1.0, 2.0], [np.nan, np.nan], [3.0, 4.0]])
        ds = numeric_dataset(vals)
        assert mask_of(ds)[1].tolist() == [1, 1]


class TestPatterns:
    def test_fig2_groups(self):
        vals = np.array([[1.0, 2.0, 3.0], [np.nan, 5.0, 6.0], [np.nan, np.nan, 9.0]])
        table = patterns(numeric_dataset(vals))
        assert [g.pattern for g in table.groups] == [(0, 0, 0), (1, 0, 0), (1, 1, 0)]
        assert all(len(g.rows) == 1 for g in table.groups)

    def test_complete_single_group(self):
        table = patterns(numeric_dataset(np.ones((4, 2))))
        assert len(table.groups) == 1
        assert table.groups[0].rows == (0, 1, 2, 3)

    def test_shared_mask_grouping(self):
        # direct grouping oracle: rows 0 and 2 share the (0, 1) pattern
        vals = np.array([[1.0, np.nan], [2.0, 5.0], [3.0, np.nan]])
        table = patterns(numeric_dataset(vals))
        by_pattern = {g.pattern: g.rows for g in table.groups}
        assert by_pattern[(0, 1)] == (0, 2)

    def test_rows_partition(self):
        vals = np.array([[1.0, np.nan], [np.nan, 2.0], [3.0, 4.0], [np.nan, 5.0]])
        table = patterns(numeric_dataset(vals))
        all_rows = sorted(r for g in table.groups for r in g.rows)
        assert all_rows == [0, 1, 2, 3]


class TestColumnStats:
    def test_fig1_age_mean(self, fig1_path):
        ds = read_csv(fig1_path)
        st = column_stats(ds, 0)
        assert st.center == 25.5
        assert st.n_obs == 2

    def test_mode_tie_lowest_level(self):
        ds = make_dataset([[0], [0], [1], [1], [2]], [["a", "b", "c"]])
        st = column_stats(ds, 0)
        assert st.center == 0.0  # tie between a and b -> lowest index
        assert np.isnan(st.sd)

    def test_mode_majority(self):
        ds = make_dataset([[2], [2], [0]], [["a", "b", "c"]])
        assert column_stats(ds, 0).center == 2.0

    def test_single_observation_sd_undefined(self):
        ds = make_dataset([[7.0], [np.nan]], ["num"])
        st = column_stats(ds, 0)
        assert st.center == 7.0
        assert np.isnan(st.sd)


class TestWriteCsv:
    def _roundtrip(self, ds, tmp_path, schema_hint=None):
        p = tmp_path / "rt.csv"
        write_csv(ds, p)
        back = read_csv(p, schema_hint=schema_hint)
        assert np.array_equal(back.mask, ds.mask)
        assert np.array_equal(back.values, ds.values, equal_nan=True)
        assert back.columns == ds.columns
        return back

    def test_fig1_roundtrip(self, fig1_path, tmp_path):
        self._roundtrip(read_csv(fig1_path), tmp_path)

    def test_quoting(self, tmp_path):
        ds = make_dataset([[0], [1]], [['with,comma', 'with"quote']])
        self._roundtrip(ds, tmp_path)

    def test_numeric_precision(self, tmp_path):
        vals = np.array([[0.1], [1 / 3], [1e-17], [123456789.123456789]])
        self._roundtrip(numeric_dataset(vals), tmp_path)

    @settings(max_examples=40, deadline=None)
    @given(ds=dataset_strategy())
    def test_roundtrip_identity_fuzz(self, ds, tmp_path_factory):
        # hint pins declared-but-unobserved categorical levels, which cannot
        # be re-inferred from the file
        tmp = tmp_path_factory.mktemp("rt")
        hint = {c.name: c.kind for c in ds.columns if c.is_categorical}
        self._roundtrip(ds, tmp, schema_hint=hint)

    def test_write_failure_has_path(self, tmp_path):
        ds = numeric_dataset(np.ones((2, 1)))
        with pytest.raises(ParseError, match="no/such"):
            write_csv(ds, tmp_path / "no" / "such" / "dir.csv")


class TestInvariants:
    def test_mask_must_match_nan(self):
        vals = np.array([[1.0, np.nan]])
        with pytest.raises(IngestionError):
            MaskedDataset(values=vals, columns=[Column("a", Numeric()), Column("b", Numeric())],
                          mask=np.zeros((1, 2), dtype=bool))

    def test_categorical_levels_validated(self):
        with pytest.raises(IngestionError):
            Categorical(())
        with pytest.raises(IngestionError):
            Categorical(("a", "a"))

    def test_bad_level_index(self):
        with pytest.raises(IngestionError, match="level"):
            make_dataset([[5.0]], [["a", "b"]])

    def test_values_immutable(self):
        ds = numeric_dataset(np.ones((2, 2)))
        with pytest.raises(ValueError):
            ds.values[0, 0] = 2.0

    def test_as_completed_requires_complete(self):
        ds = numeric_dataset(np.array([[1.0, np.nan], [1.0, 2.0]]))
        with pytest.raises(IngestionError):
            as_completed(ds)
        full = as_completed(numeric_dataset(np.ones((2, 2))))
        assert not full.imputed_mask.any()
