import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causereg.data import bin_table, ingest_csv, log_bin_counts, stratified_split
from causereg.errors import DataError, DomainError


def write(tmp_path, text, name="data.csv", newline=""):
    path = tmp_path / name
    with open(path, "w", newline=newline, encoding="utf-8") as fh:
        fh.write(text)
    return path


class TestIngest:
    def test_exact_round_trip(self, tmp_path):
        path = write(tmp_path, "a,b,label\n1,2,0\n3,4,1\n")
        table = ingest_csv(path, "label")
        assert table.columns == ["a", "b"]
        np.testing.assert_array_equal(table.x, [[1, 2], [3, 4]])
        np.testing.assert_array_equal(table.y, [0, 1])
        assert table.provenance["label_col"] == "label"

    def test_non_numeric_cell_reports_row_and_column(self, tmp_path):
        path = write(tmp_path, "dx_100,dx_401,label\n1,2,0\n3,oops,1\n")
        with pytest.raises(DataError, match=r"row 3, column 'dx_401'"):
            ingest_csv(path, "label")

    def test_crlf_and_lf_line_endings_agree(self, tmp_path):
        lf = ingest_csv(write(tmp_path, "a,b,label\n1,2,0\n3,4,1\n", "lf.csv"), "label")
        crlf = ingest_csv(write(tmp_path, "a,b,label\r\n1,2,0\r\n3,4,1\r\n", "crlf.csv"), "label")
        np.testing.assert_array_equal(lf.x, crlf.x)
        np.testing.assert_array_equal(lf.y, crlf.y)
        assert lf.columns == crlf.columns

    def test_missing_label_column_rejected(self, tmp_path):
        path = write(tmp_path, "a,b\n1,2\n")
        with pytest.raises(DataError, match="missing label column"):
            ingest_csv(path, "label")

    def test_non_binary_label_rejected(self, tmp_path):
        path = write(tmp_path, "a,label\n1,2\n")
        with pytest.raises(DataError, match="binary"):
            ingest_csv(path, "label")

    def test_label_column_position_does_not_matter(self, tmp_path):
        path = write(tmp_path, "label,a,b\n1,5,6\n0,7,8\n")
        table = ingest_csv(path, "label")
        assert table.columns == ["a", "b"]
        np.testing.assert_array_equal(table.x, [[5, 6], [7, 8]])

    def test_ragged_row_rejected(self, tmp_path):
        path = write(tmp_path, "a,b,label\n1,2,0\n3,1\n")
        with pytest.raises(DataError, match="line 3"):
            ingest_csv(path, "label")


class TestLogBin:
    def test_zero_maps_to_bin_zero(self):
        assert log_bin_counts(np.array([0]))[0] == 0

    def test_seven_maps_to_bin_three(self):
        # floor(log2(8)) = 3
        assert log_bin_counts(np.array([7]))[0] == 3

    def test_huge_count_clamps_to_top_bin(self):
        assert log_bin_counts(np.array([10**6]))[0] == 15

    def test_negative_count_rejected(self):
        with pytest.raises(DomainError):
            log_bin_counts(np.array([-1]))

    def test_monotone_and_surjective_up_to_2_16(self):
        counts = np.arange(0, 2**16 + 1)
        bins = log_bin_counts(counts)
        assert np.all(np.diff(bins) >= 0)
        assert set(np.unique(bins)) == set(range(16))

    @given(c=st.integers(0, 10**9), bins=st.integers(2, 32))
    @settings(max_examples=60, deadline=None)
    def test_formula(self, c, bins):
        expected = min(int(np.floor(np.log2(c + 1.0))), bins - 1)
        assert log_bin_counts(np.array([c]), bins)[0] == expected

    def test_bin_table_marks_provenance(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,label\n300,0\n1,1\n")
        table = bin_table(ingest_csv(path, "label"))
        assert table.provenance["binned"] is True
        np.testing.assert_array_equal(table.x, [[8], [1]])


class TestSplit:
    def test_fractions_and_stratification(self):
        y = np.array([0] * 80 + [1] * 20)
        tr, va, te = stratified_split(y, (0.75, 0.10, 0.15), seed=1)
        assert len(tr) + len(va) + len(te) == 100
        assert len(set(tr) | set(va) | set(te)) == 100
        assert abs(y[tr].mean() - 0.2) < 0.05

    def test_bad_fractions_rejected(self):
        with pytest.raises(DomainError):
            stratified_split(np.zeros(10), (0.5, 0.2, 0.2))
