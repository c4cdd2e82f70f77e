import json
from pathlib import Path

import pytest

from blocksched.cli import EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, main


def run_cli(*argv):
    return main(list(argv))


class TestBench:
    def test_two_summaries(self, tmp_path, capsys):
        code = run_cli(
            "bench", "--op", "xty", "--n", "64", "--d", "8",
            "--grid", "4x1", "--nodes", "2x1", "--workers", "2",
            "--scheduler", "lshs,rr", "--out", str(tmp_path / "out"),
        )
        assert code == EXIT_OK
        lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("op=")]
        assert len(lines) == 2
        assert (tmp_path / "out" / "xty_lshs_trace.csv").exists()
        assert (tmp_path / "out" / "xty_rr_schedule.json").exists()

    def test_deterministic_outputs(self, tmp_path):
        blobs = []
        for run in range(2):
            out = tmp_path / f"out{run}"
            assert run_cli(
                "bench", "--op", "matmul", "--n", "16", "--d", "4",
                "--grid", "2x2", "--nodes", "2x1", "--workers", "2",
                "--seed", "5", "--out", str(out),
            ) == EXIT_OK
            blobs.append(
                (
                    (out / "matmul_lshs_trace.csv").read_bytes(),
                    (out / "matmul_lshs_schedule.json").read_bytes(),
                )
            )
        assert blobs[0] == blobs[1]

    def test_graph_dump(self, tmp_path):
        dump = tmp_path / "graph.json"
        assert run_cli(
            "bench", "--op", "add", "--n", "16", "--d", "2",
            "--grid", "4x1", "--nodes", "2x1", "--workers", "2",
            "--out", str(tmp_path / "o"), "--dump-graph", str(dump),
        ) == EXIT_OK
        body = dump.read_text().splitlines()
        payload = json.loads("\n".join(l for l in body if not l.startswith("#")))
        assert {row["kind"] for row in payload} == {"leaf", "binary"}

    def test_result_dump(self, tmp_path):
        assert run_cli(
            "bench", "--op", "add", "--n", "8", "--d", "2",
            "--grid", "2x1", "--nodes", "1x1", "--workers", "2",
            "--out", str(tmp_path / "o"), "--dump-result",
        ) == EXIT_OK
        from blocksched.executor import read_array_binary

        arr = read_array_binary(tmp_path / "o" / "add_lshs_result.bin")
        assert arr.shape == (8, 2)

    def test_usage_error(self, capsys):
        assert run_cli("bench", "--op", "frobnicate") == EXIT_USAGE

    def test_plots_written(self, tmp_path):
        assert run_cli(
            "bench", "--op", "xty", "--n", "16", "--d", "2",
            "--grid", "4x1", "--nodes", "2x1", "--workers", "2",
            "--out", str(tmp_path / "o"), "--plot-dir", str(tmp_path / "figs"),
        ) == EXIT_OK
        assert (tmp_path / "figs" / "xty_lshs_trace.png").exists()


class TestAnalyze:
    def test_csv_and_exit_code(self, tmp_path):
        out = tmp_path / "analysis.csv"
        code = run_cli(
            "analyze", "--families", "elementwise,reduce,inner",
            "--k", "2", "--r", "2", "--n-block", "16", "--out", str(out),
        )
        assert code == EXIT_OK
        lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
        assert lines[0] == "op,family,k,r,n,bound_s,sim_s,ratio"
        assert len(lines) == 4

    def test_violation_exits_two(self, tmp_path, monkeypatch):
        from blocksched import analysis as analysis_mod
        from blocksched import cli as cli_mod

        def fake_compare(schedule, profile, op=None, mode="ray"):
            return analysis_mod.CompareRow(op or "x", profile.family,
                                           profile.k, profile.r, profile.n,
                                           bound_s=10.0, sim_s=1.0)

        monkeypatch.setattr(cli_mod.analysis, "compare", fake_compare)
        code = run_cli(
            "analyze", "--families", "elementwise", "--k", "2", "--r", "2",
            "--n-block", "8", "--out", str(tmp_path / "a.csv"),
        )
        assert code == EXIT_VIOLATION

    def test_plot(self, tmp_path):
        assert run_cli(
            "analyze", "--families", "reduce", "--k", "2", "--r", "2",
            "--n-block", "8", "--out", str(tmp_path / "a.csv"),
            "--plot-dir", str(tmp_path / "figs"),
        ) == EXIT_OK
        assert (tmp_path / "figs" / "bounds.png").exists()


class TestLangCommands:
    def test_translate_output(self, tmp_path, capsys):
        src = tmp_path / "prog.sp"
        src.write_text("x = 1 + 2")
        assert run_cli("translate", str(src)) == EXIT_OK
        assert capsys.readouterr().out.strip() == "x = R(+)(put(1), put(2))"

    def test_run_both_equivalent(self, tmp_path, capsys):
        src = tmp_path / "prog.sp"
        src.write_text("x = 0; while x < 3 do { x = x + 1 }")
        assert run_cli("run", str(src), "--workers", "2", "--seed", "4") == EXIT_OK
        out = capsys.readouterr().out
        assert "equivalent: True" in out

    def test_run_fuel_bottom(self, tmp_path, capsys):
        src = tmp_path / "loop.sp"
        src.write_text("while True do { skip }")
        assert run_cli("run", str(src), "--fuel", "25") == EXIT_OK
        out = capsys.readouterr().out
        assert "serial: bottom" in out and "futures: bottom" in out

    def test_syntax_error_usage_exit(self, tmp_path, capsys):
        src = tmp_path / "bad.sp"
        src.write_text("x = = 2")
        assert run_cli("run", str(src)) == EXIT_USAGE


class TestGlmCommand:
    def test_synth_run(self, capsys):
        code = run_cli(
            "glm", "--data", "synth:400,3,1", "--nodes", "2x1",
            "--workers", "2", "--max-iter", "15",
        )
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "converged=True" in out
        assert "accuracy=1.0000" in out

    def test_csv_input_and_outputs(self, tmp_path, capsys):
        import numpy as np

        from blocksched.glm import synth_bimodal

        x, y = synth_bimodal(64, 2, seed=0)
        data = np.hstack([x, y])
        path = tmp_path / "train.csv"
        np.savetxt(path, data, delimiter=",")
        code = run_cli(
            "glm", "--data", str(path), "--nodes", "2x1", "--workers", "2",
            "--grid", "4", "--out", str(tmp_path / "g"),
            "--plot-dir", str(tmp_path / "figs"),
        )
        assert code == EXIT_OK
        assert (tmp_path / "g" / "glm_trace.csv").exists()
        assert (tmp_path / "g" / "beta.csv").exists()
        assert (tmp_path / "figs" / "glm_convergence.png").exists()

    def test_bad_synth_spec(self, capsys):
        assert run_cli("glm", "--data", "synth:oops") == EXIT_USAGE
