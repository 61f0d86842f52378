import csv
import io
import json

import pytest

from chorefair import instances as io_
from chorefair.cli import bench, main, pipeline, rows_to_csv, worst_factors
from chorefair.instances import Instance, random_instance
from chorefair.verify import is_efk, is_efx


def run(capsys, *args):
    code = main(list(args))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def inst_file(tmp_path):
    path = tmp_path / "inst.json"
    io_.save(random_instance(3, 7, "uniform", 3), str(path))
    return path


def test_solve_round_check(tmp_path, capsys, inst_file):
    eq = tmp_path / "eq.json"
    trace = tmp_path / "trace.json"
    alloc = tmp_path / "alloc.json"
    dot = tmp_path / "g.dot"
    assert run(capsys, "--dump-graph", str(dot), "er-solve", "-i", str(inst_file), "--e", "1", "--c", "1/2",
               "-o", str(eq), "--trace", str(trace))[0] == 0
    assert json.loads(trace.read_text())["reason"] == "Solved(z=0)"
    assert dot.read_text().startswith("graph") or dot.read_text().startswith("digraph")
    assert run(capsys, "round", "--mode", "half", "-i", str(eq), "-o", str(alloc))[0] == 0
    code, out, _ = run(capsys, "check", "-i", str(inst_file), "--alloc", str(alloc), "--criterion", "EFk",
                       "--alpha", "2", "--k", "2", "--mpb")
    assert code == 0 and json.loads(out)["mpb"] is True
    code, out, _ = run(capsys, "check", "-i", str(inst_file), "--eq", str(eq))
    assert code == 0 and json.loads(out)["ok"]


def test_check_failure_exit_code(tmp_path, capsys):
    inst = tmp_path / "i.json"
    alloc = tmp_path / "a.json"
    io_.save(Instance.from_matrix([[1, 1, 1], [1, 1, 1]]), str(inst))
    io_.save(io_.Allocation.from_bundles([[0, 1, 2], []]), str(alloc))
    code, out, _ = run(capsys, "check", "-i", str(inst), "--alloc", str(alloc), "--criterion", "EFX")
    assert code == 1
    w = json.loads(out)["witness"]
    assert w["agent"] == 0 and w["target"] == 1


def test_enum_and_efx_commands(tmp_path, capsys, inst_file):
    eq = tmp_path / "eq.json"
    assert run(capsys, "er-enum", "-i", str(inst_file), "--e", "1", "--c", "1/2", "-o", str(eq))[0] == 0
    code, out, _ = run(capsys, "efx", "-i", str(inst_file), "--eq", str(eq))
    assert code == 0
    alloc = io_.from_json(json.loads(out))
    assert is_efx(random_instance(3, 7, "uniform", 3), alloc, 4)


def test_exit_codes(tmp_path, capsys, inst_file):
    assert run(capsys, "round", "--mode", "one", "-i", str(tmp_path / "missing.json"))[0] == 2
    assert run(capsys, "bivalued", "-i", str(inst_file))[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run(capsys, "efx", "-i", str(bad))[0] == 2
    assert run(capsys, "--max-pivots", "1", "er-solve", "-i", str(inst_file), "--c", "1/2")[0] == 3
    assert run(capsys, "pipeline", "-i", str(inst_file), "--goal", "nope")[0] == 2


def test_gen_is_seeded(capsys):
    _, a, _ = run(capsys, "--seed", "4", "gen", "--n", "2", "--m", "3")
    _, b, _ = run(capsys, "--seed", "4", "gen", "--n", "2", "--m", "3")
    _, c, _ = run(capsys, "--seed", "4", "gen", "--n", "2", "--m", "3", "--e", "1", "--c", "1/2")
    assert a == b
    assert "c" in json.loads(c)


def test_oracle_command(capsys, inst_file, tmp_path):
    code, out, _ = run(capsys, "oracle", "-i", str(inst_file), "--criterion", "EF1")
    assert code == 0 and json.loads(out)["alpha"] == "1/1"


@pytest.mark.parametrize(
    "n,m,goal,algorithm,solver",
    [
        (3, 5, "ef2po", "balanced_po", ""),
        (3, 7, "ef2po", "round_er_half", "enum"),
        (3, 3, "ef1po", "balanced_po", ""),
        (4, 6, "ef1po", "round_er_one+rebalance_ef1", "lemke"),
        (3, 6, "efx", "efx_small", ""),
        (3, 7, "efx", "four_efx", "enum"),
    ],
)
def test_pipeline_routes(n, m, goal, algorithm, solver):
    inst = random_instance(n, m, "uniform", n * m)
    alloc, payments, rep = pipeline(inst, goal)
    assert rep.algorithm == algorithm and rep.guarantee
    if goal == "efx" and m <= 2 * n:
        assert rep.efx == "1/1"
    if algorithm == "balanced_po":
        assert rep.certificate is True
        assert is_efk(inst, alloc, 2 if goal == "ef2po" else 1)
    assert rep.solver == solver


def test_pipeline_bivalued_routes():
    small = random_instance(3, 5, "bivalued:2:6", 1)
    assert pipeline(small, "bivalued")[2].algorithm == "bivalued_efx_po_small"
    big = random_instance(3, 8, "bivalued:2:6", 1)
    alloc, _, rep = pipeline(big, "bivalued")
    assert rep.algorithm == "bivalued_3efx_po" and is_efx(big, alloc, 3)


def test_pipeline_report_file(tmp_path, capsys, inst_file):
    rep = tmp_path / "r.csv"
    out = tmp_path / "a.json"
    code, _, _ = run(capsys, "--format", "csv", "pipeline", "-i", str(inst_file), "--goal", "ef1po",
                     "-o", str(out), "--report", str(rep))
    assert code == 0
    row = next(csv.DictReader(io.StringIO(rep.read_text())))
    assert row["goal"] == "ef1po" and row["guarantee"] == "True"


def test_bench_empty_and_deterministic(tmp_path, capsys):
    assert rows_to_csv(bench(3, 5, "uniform", 0, 0, ["efx"])).count("\n") == 1
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert run(capsys, "--format", "csv", "--seed", "2", "bench", "--n", "2", "--m", "5", "--count", "4",
                   "--goals", "efx,ef2po", "--workers", "2", "-o", str(path))[0] == 0
    assert a.read_text() == b.read_text()
    assert len(a.read_text().splitlines()) == 9


def test_bench_uniform_efx_within_four():
    rows = bench(3, 8, "uniform", 100, 0, ["efx"])
    assert len(rows) == 100
    worst = worst_factors(rows)["efx"]
    assert worst != "inf" and io_.as_fraction(worst) <= 4
