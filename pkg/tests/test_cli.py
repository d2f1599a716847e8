import csv
import json

import numpy as np
import pytest

from gcare.cli import main
from gcare.errors import ProblemFileError
from gcare.problem_file import dump_problem, load_problem, parse_problem


def mat(rows, cols, data):
    return {"rows": rows, "cols": cols, "data": data}


E1 = {"A": mat(1, 1, [0]), "B": mat(1, 1, [1]), "Q": mat(1, 1, [1]),
      "S": mat(1, 1, [0]), "R": mat(1, 1, [1]), "T": 1.0, "x0": [1.0]}
E2 = {"A": mat(2, 2, [0, 0, 0, 0]), "B": mat(2, 2, [1, 0, 0, 1]),
      "Q": mat(2, 2, [1, 0, 0, 0]), "S": mat(2, 2, [0, 0, 0, 0]),
      "R": mat(2, 2, [1, 0, 0, 0]), "H": mat(2, 2, [1, 0, 0, 1]), "T": 3.0,
      "x0": [1.0, 1.0]}


def write(tmp_path, doc, name="p.json"):
    p = tmp_path / name
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc, indent=1))
    return p


def run(capsys, *argv):
    code = main([*argv, "--no-timestamp"])
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_care_e1(tmp_path, capsys):
    code, out, _ = run(capsys, "solve-care", str(write(tmp_path, E1)))
    rep = json.loads(out)
    assert code == 0 and rep["exit_status"] == 0
    assert rep["solver"]["Xbar"][0][0] == pytest.approx(1.0, abs=1e-8)
    assert rep["tolerances"]["rank_tol"] == 1e-10


def test_validate_indefinite(tmp_path, capsys):
    doc = dict(E1, Q=mat(1, 1, [-1]))
    code, out, err = run(capsys, "validate", str(write(tmp_path, doc)))
    assert code == 2
    assert "Π not positive semidefinite" in err
    assert json.loads(out)["validation"]["pi_psd"] is False


def test_divergence_exit_code(tmp_path, capsys):
    doc = dict(E1, R=mat(1, 1, [0]))
    code, out, err = run(capsys, "solve-care", str(write(tmp_path, doc)))
    assert code == 3
    assert "linear-growth" in err
    assert json.loads(out)["solver"]["growth"]["classification"] == "linear-growth"


@pytest.mark.parametrize("text,where", [
    ('{"A": {"rows": 1, "cols": 1, "data": [0]},\n "B": ', "line 2, column"),
    (json.dumps(dict(E1, B=mat(1, 1, [1, 2]))), "$.B.data"),
    (json.dumps(dict(E1, Q=mat(1, 1, ["x"]))), "$.Q.data[0]"),
    (json.dumps(dict(E1, x0=[1.0, 2.0])), "$.x0"),
    (json.dumps(dict(E1, bogus=1)), "$.bogus"),
    (json.dumps({k: v for k, v in E1.items() if k != "R"}), "missing matrix 'R'"),
    (json.dumps(dict(E1, B=mat(2, 1, [1, 1]))), "B has shape"),
])
def test_parse_errors(tmp_path, capsys, text, where):
    code, _, err = run(capsys, "validate", str(write(tmp_path, text)))
    assert code == 4
    assert where in err


def test_missing_file(tmp_path, capsys):
    code, _, err = run(capsys, "validate", str(tmp_path / "absent.json"))
    assert code == 4 and "cannot read" in err


def test_report_is_deterministic(tmp_path, capsys):
    p = str(write(tmp_path, E2))
    outs = [run(capsys, "solve-lq", p)[1] for _ in range(2)]
    assert outs[0] == outs[1]
    rep = json.loads(outs[0])["lq"]
    assert rep["optimal_value"] == pytest.approx(1.0, abs=1e-9)
    assert rep["penalty_reduced"] is True


def test_problem_block_round_trips(tmp_path, capsys):
    doc = dict(E2, settings={"rank_tol": 1e-9})
    doc["A"] = mat(2, 2, [0.1, 1 / 3, -2e-17, 7.25])
    _, out, _ = run(capsys, "validate", str(write(tmp_path, doc)))
    block = json.loads(out)["problem"]
    back = parse_problem(json.dumps(block))
    orig = load_problem(tmp_path / "p.json")
    assert back.sigma.same_as(orig.sigma)
    assert np.array_equal(back.H, orig.H) and back.T == orig.T
    assert dump_problem(back) == block


def test_solve_lq_infinite(tmp_path, capsys):
    code, out, _ = run(capsys, "solve-lq", str(write(tmp_path, E1)), "--infinite", "--x0", "2")
    rep = json.loads(out)["lq"]
    assert code == 0
    assert rep["optimal_value"] == pytest.approx(4.0, abs=1e-7)
    assert rep["K"][0][0] == pytest.approx(1.0, abs=1e-8)


def test_simulate_writes_csv(tmp_path, capsys):
    out_csv = tmp_path / "traj.csv"
    code, out, _ = run(capsys, "simulate", str(write(tmp_path, E2)), "--law", "infinite",
                       "--horizon", "4", "--free-signal", "0", "1", "--x0", "1", "0",
                       "--out", str(out_csv))
    assert code == 0
    with open(out_csv) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "x_1", "x_2", "u_1", "u_2", "integrand"]
    data = np.array(rows[1:], dtype=float)
    assert np.allclose(data[:, 1], np.exp(-data[:, 0]), atol=1e-8)
    assert np.allclose(data[:, 2], data[:, 0], atol=1e-8)
    assert json.loads(out)["simulation"]["cost"] == pytest.approx(1 - np.exp(-8), abs=1e-6)


def test_simulate_finite(tmp_path, capsys):
    out_csv = tmp_path / "traj.csv"
    code, out, _ = run(capsys, "simulate", str(write(tmp_path, E1)), "--law", "finite",
                       "--out", str(out_csv))
    assert code == 0
    assert json.loads(out)["simulation"]["cost"] == pytest.approx(np.tanh(1.0), abs=1e-8)


def test_geometry_command(tmp_path, capsys):
    code, out, _ = run(capsys, "geometry", str(write(tmp_path, E2)))
    geo = json.loads(out)["geometry"]
    assert code == 0 and geo["identity_SR"] and geo["crosscheck_R"]
    assert geo["dim_Rstar"] == 1


def test_tolerance_flags_are_recorded(tmp_path, capsys):
    _, out, _ = run(capsys, "solve-care", str(write(tmp_path, E1)), "--rank-tol", "1e-8",
                    "--ode-tol", "1e-9", "--stat-tol", "1e-8")
    tols = json.loads(out)["tolerances"]
    assert tols == {"rank_tol": 1e-8, "ode_tol": 1e-9, "stat_tol": 1e-8, "t_max": 1000.0}


@pytest.mark.parametrize("jobs", ["1", "2"])
def test_batch(tmp_path, capsys, jobs):
    write(tmp_path, E1, "a.json")
    write(tmp_path, dict(E1, Q=mat(1, 1, [-1])), "b.json")
    write(tmp_path, "{", "c.json")
    code, out, _ = run(capsys, "batch", str(tmp_path), "--jobs", jobs)
    rep = json.loads(out)
    assert code == 4
    assert rep["exit_codes"] == {"a.json": 0, "b.json": 2, "c.json": 4}


def test_parse_problem_api():
    pf = parse_problem(json.dumps(E2))
    assert pf.sigma.n == 2 and pf.T == 3.0
    with pytest.raises(ProblemFileError) as info:
        parse_problem("[1, 2]")
    assert info.value.location == "$"
