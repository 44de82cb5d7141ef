import json

import networkx as nx
import numpy as np
import pytest
import scipy.io
import scipy.sparse

from app.core.utils import parse_edge_list, read_matrix
from app.main import run


def run_json(capsys, argv: list[str]) -> tuple[int, dict | None]:
    code = run(argv)
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def without_timing(report: dict) -> dict:
    return {key: value for key, value in report.items() if key != "timing"}


@pytest.fixture
def balance_file(write_file):
    # two diagonal sign matrices in R^{2x2}
    return write_file("balance.txt", "2 2\n1 0\n0 -1\n1 0\n0 1\n")


@pytest.fixture
def rows_file(write_file, orthonormal_rows):
    rows = orthonormal_rows(40, 3)
    body = "\n".join(" ".join(f"{x:.17g}" for x in row) for row in rows)
    return write_file("rows.txt", f"40 3\n{body}\n")


class TestUsage:
    def test_help_exits_cleanly(self, capsys):
        assert run(["--help"]) == 0
        assert "balance" in capsys.readouterr().out

    def test_missing_required_flag(self, capsys):
        assert run(["balance"]) == 2

    def test_unknown_subcommand(self, capsys):
        assert run(["nonsense"]) == 2

    def test_missing_file(self, capsys, tmp_path):
        assert run(["balance", "--matrices", str(tmp_path / "absent.txt")]) == 2

    def test_step_count_is_rejected_where_it_is_derived(self, capsys, balance_file):
        assert run(["balance", "--matrices", str(balance_file), "--t", "3"]) == 2
        assert "--t" in capsys.readouterr().err


class TestBalance:
    def test_report(self, capsys, balance_file):
        code, report = run_json(capsys, ["balance", "--matrices", str(balance_file)])
        assert code == 0
        assert report["subcommand"] == "balance"
        assert set(report["outputs"]["signs"]) <= {-1, 1}
        assert report["outputs"]["value"] <= report["outputs"]["bound"]
        assert all(c["passed"] for c in report["certification"])
        assert report["inputs"]["matrices"] == str(balance_file)

    def test_baselines(self, capsys, balance_file):
        code, report = run_json(
            capsys, ["balance", "--matrices", str(balance_file), "--baseline-seeds", "3"]
        )
        assert code == 0
        assert len(report["outputs"]["baseline_values"]) == 3

    def test_rejects_asymmetric_matrix(self, capsys, write_file):
        path = write_file("bad.txt", "1 2\n1 2\n0 1\n")
        assert run(["balance", "--matrices", str(path)]) == 2

    def test_rejects_norm_above_one(self, capsys, write_file):
        path = write_file("big.txt", "1 1\n2\n")
        assert run(["balance", "--matrices", str(path)]) == 2

    def test_out_file(self, capsys, balance_file, tmp_path):
        out = tmp_path / "report.json"
        code, report = run_json(capsys, ["balance", "--matrices", str(balance_file), "--out", str(out)])
        assert code == 0
        assert without_timing(json.loads(out.read_text())) == without_timing(report)


class TestCayley:
    def test_generated_group(self, capsys):
        code, report = run_json(capsys, ["cayley", "--group", "cyclic", "--order", "8"])
        assert code == 0
        outputs = report["outputs"]
        assert outputs["lambda"] <= 0.5
        assert len(outputs["S"]) == 2 * outputs["t"]
        assert min(outputs["S"]) >= 1 and max(outputs["S"]) <= 8

    def test_table_file_with_audit(self, capsys, write_file):
        table = "4\n1 2 3 4\n2 3 4 1\n3 4 1 2\n4 1 2 3\n"
        path = write_file("z4.txt", table)
        code, report = run_json(capsys, ["cayley", "--table", str(path), "--t", "6", "--audit", "--certify", "off"])
        assert code == 0
        assert len(report["outputs"]["audit"]) == 6
        assert [c["metric"] for c in report["certification"]] == ["estrada_gap"]

    def test_certification_failure_exits_with_three(self, capsys):
        code, report = run_json(
            capsys, ["cayley", "--group", "cyclic", "--order", "16", "--t", "1", "--epsilon", "0.1"]
        )
        assert code == 3
        assert report["certification"][0]["metric"] == "lambda"
        assert report["certification"][0]["passed"] is False

    def test_group_needs_order(self, capsys):
        assert run(["cayley", "--group", "cyclic"]) == 2

    def test_invalid_table(self, capsys, write_file):
        path = write_file("bad.txt", "2\n1 1\n2 1\n")
        assert run(["cayley", "--table", str(path)]) == 2


class TestIsotropicAndSpectral:
    def test_isotropic(self, capsys, rows_file):
        code, report = run_json(capsys, ["isotropic", "--rows", str(rows_file), "--audit-t", "5"])
        assert code == 0
        assert report["outputs"]["residual"] <= 0.5
        assert report["outputs"]["equivalence"] is True
        assert min(report["outputs"]["indices"]) >= 1

    def test_results_do_not_depend_on_threads(self, capsys, rows_file):
        _, single = run_json(capsys, ["isotropic", "--rows", str(rows_file), "--threads", "1"])
        _, pooled = run_json(capsys, ["isotropic", "--rows", str(rows_file), "--threads", "4"])
        assert without_timing(single) == without_timing(pooled)

    def test_spectral(self, capsys, write_file, rng):
        vectors = rng.standard_normal((30, 3))
        body = "\n".join(" ".join(f"{x:.17g}" for x in row) for row in vectors)
        path = write_file("vectors.txt", f"30 3\n{body}\n")
        code, report = run_json(capsys, ["spectral", "--vectors", str(path)])
        assert code == 0
        assert report["outputs"]["support_size"] <= report["outputs"]["budget"] == 12

    def test_graph_with_cut_check(self, capsys, write_file, tmp_path):
        graph = nx.complete_graph(10)
        lines = [f"{i + 1} {j + 1} 1" for i, j in graph.edges]
        path = write_file("k10.txt", f"10 {len(lines)}\n" + "\n".join(lines) + "\n")
        out = tmp_path / "sparse.txt"
        code, report = run_json(
            capsys, ["graph", "--edges", str(path), "--check-cuts", "--edges-out", str(out)]
        )
        assert code == 0
        assert 0.125 <= report["outputs"]["cut_ratio_min"] <= report["outputs"]["cut_ratio_max"] <= 3.375
        n, kept = parse_edge_list(out.read_text())
        assert n == 10
        assert len(kept) == report["outputs"]["edges_kept"]


class TestElementwise:
    def test_generic(self, capsys, write_file, tmp_path):
        path = write_file("a.txt", "2 2\n1 0\n0 1\n")
        out = tmp_path / "a_sparse.mtx"
        code, report = run_json(capsys, ["elementwise", "--matrix", str(path), "--matrix-out", str(out)])
        assert code == 0
        assert report["outputs"]["t"] == 2
        assert report["outputs"]["error"] == 0.0
        assert np.array_equal(read_matrix(out), np.eye(2))

    @pytest.mark.parametrize("mode", ["rand", "det", "bss"])
    def test_sdd_modes(self, capsys, write_file, mode):
        path = write_file("k3.txt", "3 3\n2 -1 -1\n-1 2 -1\n-1 -1 2\n")
        argv = ["sdd", "--matrix", str(path), "--mode", mode]
        code, report = run_json(capsys, argv)
        assert code == 0
        assert report["outputs"]["mode"] == mode
        assert report["outputs"]["relative_error"] <= 0.4
        if mode == "rand":
            assert report["outputs"]["norm_source"] == "power_iteration"

    def test_sdd_reads_matrix_market(self, capsys, tmp_path):
        path = tmp_path / "k2.mtx"
        scipy.io.mmwrite(str(path), scipy.sparse.coo_matrix(np.array([[1.0, -1.0], [-1.0, 1.0]])))
        code, report = run_json(capsys, ["sdd", "--matrix", str(path), "--mode", "det"])
        assert code == 0
        assert report["outputs"]["nnz"] == 4


class TestVerify:
    def test_identities_and_families(self, capsys, balance_file):
        code, report = run_json(
            capsys,
            ["verify", "--trials", "5", "--matrices", str(balance_file), "--group", "cyclic", "--order", "6"],
        )
        assert code == 0
        names = {family["family"] for family in report["outputs"]["families"]}
        assert names == {"balancing", "cayley"}
        assert all(c["passed"] for c in report["certification"])
