import numpy as np
import pytest
import scipy.io
import scipy.sparse
from pydantic import ValidationError

from app.core.exceptions import FileFormatError
from app.core.utils import (
    format_edge_list,
    format_group_table,
    parse_dense_matrix,
    parse_edge_list,
    parse_group_table,
    parse_matrix_list,
    read_group_table,
    read_matrix,
    write_matrix_market,
)
from app.models.group import generate_table

Z3 = "3\n1 2 3\n2 3 1\n3 1 2\n"


class TestGroupTables:
    def test_parse_is_one_based(self):
        table = parse_group_table(Z3)
        assert table.n == 3
        assert table.identity == 0
        assert table.inverse.tolist() == [0, 2, 1]

    def test_comments_and_blank_lines_are_skipped(self):
        table = parse_group_table("# Z_3\n\n" + Z3)
        assert table.n == 3

    def test_format_reads_back(self, tmp_path):
        table = generate_table("dihedral", 3)
        path = tmp_path / "d3.txt"
        path.write_text(format_group_table(table))
        assert np.array_equal(read_group_table(path).product, table.product)

    def test_wrong_row_count(self):
        with pytest.raises(FileFormatError):
            parse_group_table("3\n1 2 3\n2 3 1\n")

    def test_id_out_of_range_names_the_line(self):
        with pytest.raises(FileFormatError) as info:
            parse_group_table("2\n1 2\n2 3\n", source="g.txt")
        assert info.value.line == 3
        assert str(info.value).startswith("g.txt:3:")

    def test_repeated_entry_is_rejected(self):
        with pytest.raises(ValidationError):
            parse_group_table("2\n1 1\n2 1\n")


class TestMatrices:
    def test_dense(self):
        a = parse_dense_matrix("2 3\n1 2 3\n4 5 6\n")
        assert a.tolist() == [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]

    def test_dense_wrong_width(self):
        with pytest.raises(FileFormatError) as info:
            parse_dense_matrix("2 2\n1 2\n3\n")
        assert info.value.line == 3

    def test_not_a_number(self):
        with pytest.raises(FileFormatError):
            parse_dense_matrix("1 1\nx\n")

    def test_matrix_market_coordinate(self, tmp_path):
        path = tmp_path / "a.mtx"
        a = np.array([[2.0, 0.0], [0.0, -1.5]])
        scipy.io.mmwrite(str(path), scipy.sparse.coo_matrix(a))
        assert np.array_equal(read_matrix(path), a)

    def test_written_matrix_market_keeps_full_precision(self, tmp_path):
        path = tmp_path / "out.mtx"
        value = 0.1 + 0.2
        write_matrix_market(path, np.array([0, 1]), np.array([1, 0]), np.array([value, value]), 2)
        back = read_matrix(path)
        assert back[0, 1] == value and back[1, 0] == value

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileFormatError):
            read_matrix(tmp_path / "absent.txt")

    def test_matrix_list(self):
        matrices = parse_matrix_list("2 2\n1 0\n0 1\n0 1\n1 0\n")
        assert len(matrices) == 2
        assert matrices[1].tolist() == [[0.0, 1.0], [1.0, 0.0]]

    def test_matrix_list_block_count(self):
        with pytest.raises(FileFormatError):
            parse_matrix_list("2 2\n1 0\n0 1\n")


class TestEdgeLists:
    def test_parse_is_one_based(self):
        n, edges = parse_edge_list("3 2\n1 2 1.5\n2 3 2\n")
        assert n == 3
        assert edges == [(0, 1, 1.5), (1, 2, 2.0)]

    def test_format_reads_back(self):
        edges = [(0, 1, 1 / 3), (1, 2, 2.0)]
        assert parse_edge_list(format_edge_list(3, edges)) == (3, edges)

    def test_short_record(self):
        with pytest.raises(FileFormatError):
            parse_edge_list("3 1\n1 2\n")
