import csv
import json
import subprocess
import sys
from fractions import Fraction

import pytest

from mclp.cli import decimal_string, emit_plot_data, main, plot_series
from mclp.corpus import example_2x2, sclp_case
from mclp.io import dumps, problem_to_dict, sclp_to_dict
from mclp.model import one_dim, zero_solution
from mclp.search import solve

F = Fraction
SINGLE = {"bases": [["u1", "xdot2"]], "K0": [2], "J0": [], "KN1": [], "JN1": [2]}


@pytest.fixture
def files(tmp_path):
    prob = tmp_path / "problem.json"
    prob.write_text(dumps(problem_to_dict(example_2x2())))
    cert = tmp_path / "cert.json"
    cert.write_text(json.dumps(SINGLE))
    return tmp_path, prob, cert


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_solve_reports_exact_values(files, capsys):
    _, prob, _ = files
    code, out, _ = run(capsys, "solve", prob, "--T", "3/4")
    assert code == 0
    doc = json.loads(out)
    assert doc["solution"]["tau"] == ["5/28", "4/7"]
    assert doc["objective"] == "95045/4704"
    assert doc["verification"]["verdict"] == "Optimal"
    assert doc["meta"]["inputs"][0]["file"] == "problem.json"
    assert len(doc["meta"]["inputs"][0]["sha256"]) == 64


def test_verify_reports_the_violation(files, capsys):
    _, prob, cert = files
    code, out, _ = run(capsys, "verify", prob, cert, "--T", "1/2")
    assert code == 1
    assert json.loads(out)["verification"] == {"verdict": "Violated", "violation": "pN[1] = -1/35 < 0"}
    code, out, _ = run(capsys, "verify", prob, cert, "--T", "1/3")
    assert code == 0
    assert json.loads(out)["verification"]["verdict"] == "Optimal"


def test_sweep_intervals_and_csv(files, capsys):
    tmp, prob, _ = files
    code, out, _ = run(capsys, "sweep", prob, "--T-max", "2", "--out", tmp / "sw")
    assert code == 0
    doc = json.loads(out)
    assert [r["interval"] for r in doc["regimes"]] == [["0", "5/12"], ["5/12", "1"], ["1", "2"]]
    assert [p["status"] for p in doc["boundary_points"]] == ["non-unique", "non-unique"]
    assert (tmp / "sw" / "sweep.json").read_text() == out
    with open(tmp / "sw" / "regimes.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {"regime", "quantity", "T", "value", "value_decimal"} == set(rows[0])


def test_classify_and_validity(files, capsys, tmp_path):
    tmp, prob, cert = files
    assert run(capsys, "classify", prob, "--T", "1")[0] == 0
    bad = tmp_path / "bad.json"
    bad.write_text(dumps(problem_to_dict(one_dim(-1, 1, 1, 1))))
    code, out, _ = run(capsys, "classify", bad, "--T", "1")
    assert code == 1
    assert json.loads(out)["verdict"] == "PrimalInfeasibleDualUnbounded"
    code, out, _ = run(capsys, "validity", prob, cert)
    assert code == 0 and json.loads(out)["interval"] == ["0", "5/12"]
    code, out, _ = run(capsys, "validity", prob, cert, "--T", "1/2")
    assert code == 1 and json.loads(out)["inside"] is False


def test_sclp_verbs(tmp_path, capsys):
    s3 = tmp_path / "case3.json"
    s3.write_text(dumps(sclp_to_dict(sclp_case(3))))
    code, out, _ = run(capsys, "encode-sclp", s3)
    assert code == 0 and json.loads(out)["c"] == ["1", "-6"]
    s1 = tmp_path / "case1.json"
    s1.write_text(dumps(sclp_to_dict(sclp_case(1))))
    code, out, _ = run(capsys, "extract-sclp", s1, "--T", "2")
    assert code == 1
    doc = json.loads(out)
    assert doc["extension_objective"] == "7"
    assert doc["sclp"]["status"] == "NoOptimalExists"


def test_oracle_verb(files, capsys):
    _, prob, _ = files
    code, out, _ = run(capsys, "oracle", prob, "--T", "1", "--grid", "4")
    assert code == 0
    assert json.loads(out)["objective_bound"] == "131/6"


def test_usage_errors(files, capsys, tmp_path):
    _, prob, cert = files
    assert run(capsys, "solve", prob)[0] == 2
    assert run(capsys, "solve", prob, "--T", "0")[0] == 2
    assert run(capsys, "oracle", prob, "--T", "1")[0] == 2
    assert run(capsys, "sweep", prob)[0] == 2
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    code, _, err = run(capsys, "solve", broken, "--T", "1")
    assert code == 2 and "not valid JSON" in err
    missing = tmp_path / "missing.json"
    missing.write_text(json.dumps({"A": [[1]]}))
    assert run(capsys, "solve", missing, "--T", "1")[0] == 2
    assert run(capsys, "solve", tmp_path / "nowhere.json", "--T", "1")[0] == 2
    with pytest.raises(SystemExit) as exc:
        main(["solve", str(prob), "--T", "abc"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_dimension_cap_is_a_usage_error(tmp_path, capsys, monkeypatch):
    big = tmp_path / "big.json"
    big.write_text(json.dumps({"A": [[1] * 3] * 3, "beta": [1] * 3, "b": [1] * 3, "gamma": [1] * 3, "c": [1] * 3}))
    monkeypatch.setenv("MCLP_MAX_DIM", "4")
    code, _, err = run(capsys, "solve", big, "--T", "1")
    assert code == 2 and "MCLP_MAX_DIM" in err


def test_selftest_passes(capsys):
    code, out, _ = run(capsys, "selftest")
    assert code == 0
    assert out.strip().endswith("25/25 passed")


def test_reports_are_byte_identical_across_processes(files):
    tmp, prob, _ = files
    cmd = [sys.executable, "-m", "mclp", "solve", str(prob), "--T", "3/2"]
    first = subprocess.run(cmd, capture_output=True, check=True).stdout
    second = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert first == second


def test_solve_writes_plot_data(files, capsys):
    tmp, prob, _ = files
    code, out, _ = run(capsys, "solve", prob, "--T", "1/3", "--out", tmp / "o")
    assert code == 0
    assert (tmp / "o" / "report.json").read_text() == out
    with open(tmp / "o" / "plot" / "U1.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0] == {"kind": "impulse", "t": "0", "value": "94/105", "value_decimal": decimal_string(F(94, 105))}
    # U1 then grows with slope 3/5 up to T = 1/3
    assert rows[-2]["t"] == "1/3"
    assert F(rows[-2]["value"]) - F(rows[1]["value"]) == F(3, 5) * F(1, 3)


def test_plot_series_of_case_2_ends_with_the_jump():
    sol = solve(one_dim(1, 1, 1, -1), F(1, 2)).solution
    x = plot_series(sol)["x1"]
    assert x[-1] == ("jump", F(1, 2), -(1 + F(1, 2)))


def test_plot_series_of_zero_solution(tmp_path):
    sol = zero_solution(one_dim(0, 0, 0, 0), 1)
    for name, recs in plot_series(sol).items():
        assert all(v == 0 for _, _, v in recs), name
    paths = emit_plot_data(sol, tmp_path / "z")
    assert sorted(p.name for p in paths) == ["P1.csv", "U1.csv", "q1.csv", "x1.csv"]


def test_decimal_string():
    assert decimal_string(F(1, 3)) == "0." + "3" * 30
    assert decimal_string(F(131, 6)).startswith("21.8333")
