import pytest

from smutf.errors import DataError
from smutf.schema import (
    Column,
    DataTypeLabel,
    Schema,
    detect_cell_type,
    detect_column_type,
    load_csv,
    parse_numeric,
    sample_text_values,
)


def write(tmp_path, text, name="t.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


class TestLoadCsv:
    def test_small_table_loads_fully(self, tmp_path):
        path = write(tmp_path, "a,b,c\n" + "".join("%d,%d,%d\n" % (i, i, i) for i in range(10)))
        schema = load_csv(path, row_cap=100, seed=1)
        assert len(schema.columns) == 3
        assert all(len(c.values) == 10 for c in schema.columns)

    def test_deterministic_sampling(self, tmp_path):
        path = write(tmp_path, "a,b\n" + "".join("%d,%d\n" % (i, -i) for i in range(50)))
        s1 = load_csv(path, row_cap=5, seed=33)
        s2 = load_csv(path, row_cap=5, seed=33)
        assert s1 == s2
        assert len(s1.columns[0].values) == 5

    def test_sampling_preserves_row_alignment(self, tmp_path):
        path = write(tmp_path, "a,b\n" + "".join("%d,%d\n" % (i, i * 10) for i in range(200)))
        schema = load_csv(path, row_cap=20, seed=7)
        for left, right in zip(schema.columns[0].values, schema.columns[1].values):
            assert int(right) == int(left) * 10

    def test_empty_header_cells_get_positional_names(self, tmp_path):
        path = write(tmp_path, "a,,b\n1,2,3\n")
        schema = load_csv(path)
        assert schema.column_names == ["a", "col1", "b"]

    def test_quoted_fields_with_commas_and_newlines(self, tmp_path):
        path = write(tmp_path, 'name,note\nx,"hi, there"\ny,"line1\nline2"\n')
        schema = load_csv(path)
        assert schema.columns[1].values == ("hi, there", "line1\nline2")

    def test_missing_file_is_data_error(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(str(tmp_path / "nope.csv"))

    def test_unbalanced_quotes_are_data_error(self, tmp_path):
        path = write(tmp_path, 'a,b\n"unclosed,2\n3,4\n')
        with pytest.raises(DataError):
            load_csv(path)

    def test_no_columns_is_data_error(self, tmp_path):
        path = write(tmp_path, "")
        with pytest.raises(DataError):
            load_csv(path)

    def test_short_rows_padded_with_missing(self, tmp_path):
        path = write(tmp_path, "a,b,c\n1,2\n")
        schema = load_csv(path)
        assert schema.columns[2].values == ("",)


class TestCellType:
    @pytest.mark.parametrize(
        "cell,label",
        [
            ("https://www.dcard.tw/f", DataTypeLabel.URL),
            ("http://example.org", DataTypeLabel.URL),
            ("ftp://files.example.org/a.txt", DataTypeLabel.URL),
            ("$199", DataTypeLabel.NUMERIC),
            ("€1,234.56", DataTypeLabel.NUMERIC),
            ("-12.5", DataTypeLabel.NUMERIC),
            ("45%", DataTypeLabel.NUMERIC),
            ("2023-05-01", DataTypeLabel.DATE),
            ("2023/05/01", DataTypeLabel.DATE),
            ("01/05/2023", DataTypeLabel.DATE),
            ("2023-05-01 13:45", DataTypeLabel.DATE),
            ("2023-05-01 13:45:10", DataTypeLabel.DATE),
            ("03 Jan 2021", DataTypeLabel.DATE),
            ("Jan 03, 2021", DataTypeLabel.DATE),
            ("2023", DataTypeLabel.NUMERIC),  # bare years are not dates
            ("hello", DataTypeLabel.STRING),
            ("", DataTypeLabel.STRING),
            ("http://", DataTypeLabel.STRING),  # empty authority
            ("inf", DataTypeLabel.STRING),
            ("nan", DataTypeLabel.STRING),
        ],
    )
    def test_examples(self, cell, label):
        assert detect_cell_type(cell) == label

    def test_date_formats_match_exactly_one_known_format(self):
        # Format-list oracle: the ISO example parses under exactly one format.
        from datetime import datetime

        from smutf.schema import _DATE_FORMATS

        hits = []
        for fmt in _DATE_FORMATS:
            try:
                datetime.strptime("2023-05-01", fmt)
                hits.append(fmt)
            except ValueError:
                pass
        assert hits == ["%Y-%m-%d"]

    def test_total_function_on_arbitrary_strings(self):
        import random

        rng = random.Random(0)
        alphabet = "ab1,$.%/:-# \t€é"
        for _ in range(500):
            s = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 12)))
            assert detect_cell_type(s) in DataTypeLabel


class TestParseNumeric:
    def test_currency_and_separators(self):
        assert parse_numeric("$1,234.5") == 1234.5
        assert parse_numeric("¥300") == 300.0
        assert parse_numeric("+12") == 12.0
        assert parse_numeric("50%") == 50.0

    def test_rejects_non_numbers(self):
        for bad in ("", "abc", "$", "--5", "1.2.3", "12a"):
            assert parse_numeric(bad) is None


class TestColumnType:
    def test_numeric_column(self):
        col = Column("like", ("4123", "281842", "13"))
        assert detect_column_type(col) == DataTypeLabel.NUMERIC

    def test_string_column(self):
        assert detect_column_type(Column("x", ("a", "b", "c"))) == DataTypeLabel.STRING

    def test_mixed_below_share_is_string(self):
        # NUMERIC share 0.5 < 0.9
        assert detect_column_type(Column("x", ("1", "2", "x", "y"))) == DataTypeLabel.STRING

    def test_share_oracle_on_dirty_numeric(self):
        values = tuple(["5"] * 9 + ["oops"])
        share = sum(detect_cell_type(v) == DataTypeLabel.NUMERIC for v in values) / len(values)
        assert share >= 0.9
        assert detect_column_type(Column("x", values)) == DataTypeLabel.NUMERIC

    def test_all_empty_is_string(self):
        assert detect_column_type(Column("x", ("", "", ""))) == DataTypeLabel.STRING

    def test_empty_cells_excluded_from_share(self):
        col = Column("x", ("1", "2", "", "", ""))
        assert detect_column_type(col) == DataTypeLabel.NUMERIC


class TestSampleTextValues:
    def test_fewer_values_than_k(self):
        col = Column("x", ("a", "b", "", "c", "d", "e"))
        assert sorted(sample_text_values(col, k=20, seed=0)) == ["a", "b", "c", "d", "e"]

    def test_deterministic(self):
        col = Column("x", tuple(str(i) for i in range(100)))
        assert sample_text_values(col, 20, seed=5) == sample_text_values(col, 20, seed=5)
        assert len(sample_text_values(col, 20, seed=5)) == 20

    def test_k_one(self):
        assert sample_text_values(Column("x", ("a",)), k=1, seed=0) == ["a"]

    def test_empty_column_yields_empty(self):
        assert sample_text_values(Column("x", ("", "")), k=3, seed=0) == []


def test_schema_requires_columns():
    with pytest.raises(DataError):
        Schema("empty", ())
