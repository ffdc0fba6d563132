"""Command line subcommands, exit codes, and output formats."""

import csv
import io
import json

import pytest

import scopdd as sc
from scopdd.cli import main

from conftest import DATA, PATH_ORDER


@pytest.fixture
def net_file(tmp_path, four_node_text):
    path = tmp_path / "net.scop"
    path.write_text(four_node_text)
    return path


@pytest.fixture
def order_file(tmp_path):
    path = tmp_path / "order.txt"
    path.write_text("\n".join(PATH_ORDER) + "\n")
    return path


@pytest.fixture
def choice_file():
    return DATA / "forced_choice.obdd"


class TestCompile:
    def test_counts_and_files(self, tmp_path, net_file, order_file, capsys):
        out = tmp_path / "out"
        code = main(
            ["compile", str(net_file), "--out-dir", str(out), "--order-file", str(order_file)]
        )
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].startswith("query a->c: 12 internal nodes")
        dd = sc.load_obdd((out / "a-c.obdd").read_text())
        assert len(dd.internal_nodes()) == 12
        assert [i.name for i in dd.vars] == PATH_ORDER

    def test_disconnected_query_root_zero(self, tmp_path, capsys):
        text = (
            "node a\nnode b\nnode z\nedge a b 0.5\n"
            "query a z\nobjective maximize\n"
        )
        src = tmp_path / "p.scop"
        src.write_text(text)
        assert main(["compile", str(src), "--out-dir", str(tmp_path)]) == 0
        dd = sc.load_obdd((tmp_path / "a-z.obdd").read_text())
        assert dd.root == 0

    def test_dot_styles(self, tmp_path, net_file, capsys):
        assert main(["compile", str(net_file), "--out-dir", str(tmp_path), "--dot"]) == 0
        dot = (tmp_path / "a-c.dot").read_text()
        assert "style=dashed" in dot and "style=solid" in dot
        assert "shape=box" in dot and "shape=circle" in dot

    def test_parse_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.scop"
        bad.write_text("node a\nedge a z 0.5\n")
        assert main(["compile", str(bad)]) == 1
        assert "error" in capsys.readouterr().err


class TestPropagateCmd:
    def test_forces_y_report(self, choice_file, capsys):
        code = main(["propagate", str(choice_file), "--theta", "0.4"])
        out = capsys.readouterr().out
        assert code == 0
        assert "F = 0.600000" in out
        assert "status=ok fixed: y=1" in out
        assert "baseline: status=ok fixed: (none)" in out

    def test_theta_zero_fixes_nothing(self, choice_file, capsys):
        assert main(["propagate", str(choice_file), "--theta", "0"]) == 0
        out = capsys.readouterr().out
        assert out.count("fixed: (none)") == 2

    def test_fixed_assignment(self, choice_file, capsys):
        code = main(
            ["propagate", str(choice_file), "--theta", "0.4", "--fix", "x=0"]
        )
        out = capsys.readouterr().out
        assert code == 0
        assert "F = 0.600000" in out
        assert "fixed: y=1" in out

    def test_failed_propagation_exit_two(self, choice_file, capsys):
        assert main(["propagate", str(choice_file), "--theta", "0.7"]) == 2
        assert "status=failed" in capsys.readouterr().out

    def test_json_output(self, choice_file, capsys):
        code = main(["propagate", str(choice_file), "--theta", "0.4", "--json"])
        assert code == 0
        record = json.loads(capsys.readouterr().out)
        assert record["dc"]["fixed"] == {"y": 1}
        assert record["baseline"]["fixed"] == {}
        assert record["bound"] == pytest.approx(0.6, abs=1e-12)
        assert record["drops"]["y"] == pytest.approx(0.33, abs=1e-12)

    def test_unknown_fix_name(self, choice_file, capsys):
        assert main(["propagate", str(choice_file), "--theta", "0.4", "--fix", "q=1"]) == 1

    def test_theta_outside_reward_range(self, choice_file, capsys):
        assert main(["propagate", str(choice_file), "--theta", "1.5"]) == 1


class TestUsageErrors:
    def test_bad_arguments_exit_one(self, capsys):
        # argparse normally exits with 2, which is reserved for unsat
        with pytest.raises(SystemExit) as err:
            main(["propagate"])  # missing required arguments
        assert err.value.code == 1

    def test_unknown_subcommand_exit_one(self, capsys):
        with pytest.raises(SystemExit) as err:
            main(["frobnicate"])
        assert err.value.code == 1


class TestSolveCmd:
    def test_optimize_json(self, net_file, capsys):
        code = main(["solve", str(net_file), "--json"])
        assert code == 0
        record = json.loads(capsys.readouterr().out)
        assert record["status"] == "sat"
        assert record["value"] == pytest.approx(1.2, abs=1e-9)
        assert record["strategy"] == {
            "d_ab": 0, "d_ac": 1, "d_ad": 1, "d_bd": 0, "d_cd": 0,
        }
        assert set(record["stats"]) == {
            "nodes_expanded", "backtracks", "propagator_calls",
            "node_visits", "wall_time",
        }

    def test_unsat_exit_two(self, tmp_path, four_node_text, capsys):
        text = four_node_text.replace("objective maximize", "constraint >= 1.4")
        text = text.replace("cardinality <= 2\n", "")
        path = tmp_path / "hard.scop"
        path.write_text(text)
        assert main(["solve", str(path)]) == 2
        assert "status: unsat" in capsys.readouterr().out

    def test_sat_text_record(self, tmp_path, four_node_text, capsys):
        text = four_node_text.replace("objective maximize", "constraint >= 0.4")
        path = tmp_path / "sat.scop"
        path.write_text(text)
        assert main(["solve", str(path)]) == 0
        out = capsys.readouterr().out
        assert "status: sat" in out and "strategy:" in out and "value:" in out

    def test_theta_override_validated(self, tmp_path, four_node_text, capsys):
        text = four_node_text.replace("objective maximize", "constraint >= 0.4")
        path = tmp_path / "c.scop"
        path.write_text(text)
        assert main(["solve", str(path), "--theta", "5"]) == 1
        assert main(["solve", str(path), "--theta", "1.9"]) == 2
        capsys.readouterr()

    def test_cardinality_override(self, net_file, capsys):
        code = main(["solve", str(net_file), "--cardinality", "0", "--json"])
        assert code == 0
        record = json.loads(capsys.readouterr().out)
        assert record["value"] == pytest.approx(0.0, abs=1e-12)


class TestBenchCmd:
    def _run(self, capsys, *extra):
        argv = ["bench", "--seed", "7", "--size", "4,6", "--count", "2", *extra]
        assert main(argv) == 0
        return capsys.readouterr().out

    def test_deterministic_without_timing(self, capsys):
        first = self._run(capsys, "--no-timing")
        second = self._run(capsys, "--no-timing")
        assert first == second

    def test_rows_and_propagator_agreement(self, capsys):
        out = self._run(capsys, "--no-timing")
        rows = list(csv.DictReader(io.StringIO(out)))
        assert {r["propagator"] for r in rows} == {
            "naive", "derivative", "incremental", "baseline",
        }
        by_instance = {}
        for r in rows:
            by_instance.setdefault(r["instance"], {})[r["propagator"]] = r
        for inst in by_instance.values():
            assert inst["naive"]["fixed"] == inst["derivative"]["fixed"]
            assert int(inst["naive"]["visits"]) > int(inst["derivative"]["visits"])

    def test_timing_column_default(self, capsys):
        out = self._run(capsys)
        header = out.splitlines()[0].split(",")
        assert header[-1] == "wall_s"
