import numpy as np
import pytest
from click.testing import CliRunner

from hybridann.cli import main
from hybridann.dataio import write_fvecs


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


def _files(data):
    return {
        "base": str(data / "base.fvecs"),
        "attrs": str(data / "attrs.ivecs"),
        "queries": str(data / "query.fvecs"),
        "query_attrs": str(data / "query_attrs.ivecs"),
    }


@pytest.fixture(scope="module")
def pipeline(runner, tmp_path_factory):
    """gen -> build -> gt executed once; later tests reuse the artifacts."""
    data = tmp_path_factory.mktemp("cli") / "data"
    r = runner.invoke(main, [
        "gen", "--out", str(data), "--count", "900", "--dim", "8",
        "--categories", "6", "--queries", "30", "--seed", "5",
    ])
    assert r.exit_code == 0, r.output
    f = _files(data)
    r = runner.invoke(main, [
        "build", "--base", f["base"], "--attrs", f["attrs"],
        "--out", str(data / "index.hqann"), "-m", "8", "--ef-construction", "32",
        "--seed", "5",
    ])
    assert r.exit_code == 0, r.output
    r = runner.invoke(main, [
        "gt", "--base", f["base"], "--attrs", f["attrs"],
        "--queries", f["queries"], "--query-attrs", f["query_attrs"],
        "--out", str(data / "gt.ivecs"), "--k", "10",
    ])
    assert r.exit_code == 0, r.output
    return data


class TestPipeline:
    def test_gen_prints_manifest(self, runner, tmp_path):
        out = tmp_path / "d"
        r = runner.invoke(main, [
            "gen", "--out", str(out), "--count", "50", "--dim", "4",
            "--categories", "3", "--queries", "5",
        ])
        assert r.exit_code == 0
        lines = [l for l in r.output.splitlines() if l.startswith("wrote ")]
        assert len(lines) == 4

    def test_gen_rerun_refused_then_forced_byte_identical(self, runner, tmp_path):
        out = tmp_path / "d"
        args = ["gen", "--out", str(out), "--count", "60", "--dim", "4",
                "--categories", "3", "--queries", "5", "--seed", "9"]
        assert runner.invoke(main, args).exit_code == 0
        first = {p.name: p.read_bytes() for p in out.iterdir()}
        assert runner.invoke(main, args).exit_code == 2
        assert runner.invoke(main, args + ["--force"]).exit_code == 0
        second = {p.name: p.read_bytes() for p in out.iterdir()}
        assert first == second

    def test_search_outputs_tab_separated_pairs(self, runner, pipeline):
        f = _files(pipeline)
        r = runner.invoke(main, [
            "search", "--index", str(pipeline / "index.hqann"),
            "--base", f["base"], "--attrs", f["attrs"],
            "--queries", f["queries"], "--query-attrs", f["query_attrs"],
            "--k", "5", "--ef", "40",
        ])
        assert r.exit_code == 0, r.output
        lines = r.output.splitlines()
        assert len(lines) == 30
        fields = lines[0].split("\t")
        assert len(fields) % 2 == 0
        int(fields[0])
        float(fields[1])

    def test_bench_pipeline_produces_parseable_csv(self, runner, pipeline, tmp_path):
        f = _files(pipeline)
        out = tmp_path / "bench.csv"
        r = runner.invoke(main, [
            "bench", "--base", f["base"], "--attrs", f["attrs"],
            "--queries", f["queries"], "--query-attrs", f["query_attrs"],
            "--gt", str(pipeline / "gt.ivecs"), "--index", str(pipeline / "index.hqann"),
            "--strategy", "fusion", "--budgets", "20,40", "--threads", "1",
            "--categories", "6", "--out", str(out),
        ])
        assert r.exit_code == 0, r.output
        lines = out.read_text().splitlines()
        data_rows = [l for l in lines if not l.startswith("#")]
        header = data_rows[0].split(",")
        assert header[0] == "dataset" and "recall" in header
        assert len(data_rows) == 3
        for row in data_rows[1:]:
            rec = float(row.split(",")[header.index("recall")])
            assert 0.0 <= rec <= 1.0

    def test_bench_pre_filter_recall_all_ones(self, runner, pipeline):
        f = _files(pipeline)
        r = runner.invoke(main, [
            "bench", "--base", f["base"], "--attrs", f["attrs"],
            "--queries", f["queries"], "--query-attrs", f["query_attrs"],
            "--gt", str(pipeline / "gt.ivecs"),
            "--strategy", "pre-filter", "--budgets", "10", "--threads", "1",
        ])
        assert r.exit_code == 0, r.output
        rows = [l for l in r.output.splitlines() if l and not l.startswith("#")]
        header = rows[0].split(",")
        for row in rows[1:]:
            assert row.split(",")[header.index("recall")] == "1.000000"

    def test_bench_recall_column_byte_identical_across_runs(self, runner, pipeline):
        f = _files(pipeline)
        args = [
            "bench", "--base", f["base"], "--attrs", f["attrs"],
            "--queries", f["queries"], "--query-attrs", f["query_attrs"],
            "--gt", str(pipeline / "gt.ivecs"), "--index", str(pipeline / "index.hqann"),
            "--strategy", "fusion", "--budgets", "20,40,80", "--threads", "1",
        ]

        def recall_col():
            r = runner.invoke(main, args)
            assert r.exit_code == 0
            rows = [l for l in r.output.splitlines() if l and not l.startswith("#")]
            idx = rows[0].split(",").index("recall")
            return [row.split(",")[idx] for row in rows[1:]]

        assert recall_col() == recall_col()


class TestSuitesCli:
    def test_robustness_to_stdout(self, runner, pipeline):
        f = _files(pipeline)
        r = runner.invoke(main, [
            "robustness", "--base", f["base"], "--c-values", "2,4",
            "--queries", "10", "--ef", "20", "-m", "4", "--ef-construction", "16",
            "--threads", "1",
        ])
        assert r.exit_code == 0, r.output
        rows = [l for l in r.output.splitlines() if l and not l.startswith("#")]
        assert len(rows) == 1 + 6

    def test_sensitivity_writes_csv(self, runner, pipeline, tmp_path):
        f = _files(pipeline)
        out = tmp_path / "sens.csv"
        r = runner.invoke(main, [
            "sensitivity", "--base", f["base"], "--categories", "4",
            "--w-values", "0.5,0.25", "--queries", "10", "--ef", "20",
            "-m", "4", "--ef-construction", "16", "--threads", "1",
            "--out", str(out),
        ])
        assert r.exit_code == 0, r.output
        assert out.is_file()


class TestExitCodes:
    def test_flag_validation_exits_2(self, runner, tmp_path):
        r = runner.invoke(main, [
            "gen", "--out", str(tmp_path / "x"), "--count", "0",
            "--dim", "4", "--categories", "3",
        ])
        assert r.exit_code == 2

    def test_bad_budgets_exit_2(self, runner, pipeline):
        f = _files(pipeline)
        r = runner.invoke(main, [
            "bench", "--base", f["base"], "--attrs", f["attrs"],
            "--queries", f["queries"], "--query-attrs", f["query_attrs"],
            "--gt", str(pipeline / "gt.ivecs"), "--budgets", "a,b",
        ])
        assert r.exit_code == 2

    def test_missing_input_exits_1(self, runner, tmp_path):
        r = runner.invoke(main, [
            "build", "--base", str(tmp_path / "none.fvecs"),
            "--attrs", str(tmp_path / "none.ivecs"), "--out", str(tmp_path / "o.idx"),
        ])
        assert r.exit_code == 1

    def test_search_dim_mismatch_exits_1_naming_dimension(self, runner, pipeline, tmp_path):
        f = _files(pipeline)
        bad = tmp_path / "badq.fvecs"
        write_fvecs(np.ones((2, 4), dtype=np.float32), bad)
        bad_attrs = tmp_path / "badq.ivecs"
        from hybridann.dataio import write_ivecs
        write_ivecs(np.zeros((2, 1), dtype=np.int32), bad_attrs)
        r = runner.invoke(main, [
            "search", "--index", str(pipeline / "index.hqann"),
            "--base", f["base"], "--attrs", f["attrs"],
            "--queries", str(bad), "--query-attrs", str(bad_attrs),
            "--k", "2", "--ef", "10",
        ])
        assert r.exit_code == 1
        assert "8" in r.stderr and "4" in r.stderr

    def test_ef_below_k_exits_2(self, runner, pipeline):
        f = _files(pipeline)
        r = runner.invoke(main, [
            "search", "--index", str(pipeline / "index.hqann"),
            "--base", f["base"], "--attrs", f["attrs"],
            "--queries", f["queries"], "--query-attrs", f["query_attrs"],
            "--k", "10", "--ef", "5",
        ])
        assert r.exit_code == 2
