import json
import subprocess
import sys
from pathlib import Path

import pytest

from sheafopt.cli import main

DATA = Path(__file__).resolve().parent.parent / "demos" / "data"


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


def test_solve_two_axes(capsys):
    code, out, _ = run(["solve", DATA / "two_axes.json"], capsys)
    assert code == 0
    sols = {p["id"]: p["solutions"] for p in json.loads(out)["problems"]}
    assert sols == {"x-axis": [[0.5, 0.0]], "y-axis": [[0.0, 1.0]]}


def test_solve_empty_list(tmp_path, capsys):
    f = write(tmp_path, "empty.json", {"ambient_dim": 2, "problems": []})
    code, out, _ = run(["solve", f], capsys)
    assert code == 0 and json.loads(out) == {"problems": []}


def test_solve_unbounded_is_invalid(capsys):
    code, _, err = run(["solve", DATA / "unbounded.json"], capsys)
    assert code == 2 and "unbounded" in err.lower()


def test_bad_json_reports_position(tmp_path, capsys):
    f = tmp_path / "bad.json"
    f.write_text('{"ambient_dim": 2,\n "problems": [}')
    code, _, err = run(["solve", f], capsys)
    assert code == 2 and "line 2" in err


def test_schema_error_names_field(tmp_path, capsys):
    f = write(tmp_path, "bad.json", {"ambient_dim": 0})
    code, _, err = run(["solve", f], capsys)
    assert code == 2 and "$.ambient_dim" in err


def test_glue_examples(capsys, tmp_path):
    code, out, _ = run(["glue", DATA / "two_axes.json"], capsys)
    d = json.loads(out)
    assert code == 0 and d["point"] == [0.5, 1.0] and d["status"] == "exact_point"
    code, out, _ = run(["glue", DATA / "rank_deficient.json"], capsys)
    d = json.loads(out)
    assert code == 0 and d["status"] == "underdetermined" and d["affine_dim"] >= 1
    single = json.loads((DATA / "two_axes.json").read_text())
    single["problems"] = [{"id": "square", "basis": [[1, 0], [0, 1]],
                           "feasible": {"type": "box", "lower": [0, 0], "upper": [1, 1]},
                           "utility": single["problems"][0]["utility"]}]
    code, out, _ = run(["glue", write(tmp_path, "single.json", single)], capsys)
    assert json.loads(out)["point"] == pytest.approx([0.5, 1.0])


def test_surrogate_snapshot_and_round_trip(tmp_path, capsys):
    snap = tmp_path / "s.json"
    grid = tmp_path / "g.csv"
    code, _, _ = run(["surrogate", DATA / "two_axes.json", "--out", snap, "--grid-csv", grid], capsys)
    assert code == 0
    d = json.loads(snap.read_text())
    assert (d["degree"], len(d["partition"]["classes"]), len(d["incidence"]["rows"])) == (2, 4, 4)
    assert grid.read_text().splitlines()[0] == "x0,x1,V"
    from sheafopt.serialize import dumps
    from sheafopt.surrogate import SurrogateState
    assert dumps(SurrogateState.from_dict(json.loads(snap.read_text())).to_dict()) == snap.read_text()


def test_surrogate_single_problem(capsys):
    code, out, _ = run(["surrogate", DATA / "single_x_axis.json"], capsys)
    assert code == 0 and len(json.loads(out)["partition"]["classes"]) == 2


def test_surrogate_degree_too_low(capsys):
    code, _, err = run(["surrogate", DATA / "two_axes.json", "--degree", "1"], capsys)
    assert code == 3 and "degree 2" in err


def test_surrogate_is_deterministic(capsys):
    a = run(["surrogate", DATA / "two_axes.json", "--seed", "5", "--samples", "300"], capsys)[1]
    b = run(["surrogate", DATA / "two_axes.json", "--seed", "5", "--samples", "300"], capsys)[1]
    assert a == b


def test_evolve_diagonal_and_duplicate(tmp_path, capsys):
    snap = tmp_path / "s.json"
    run(["surrogate", DATA / "two_axes.json", "--out", snap], capsys)
    new = tmp_path / "n.json"
    code, _, err = run(["evolve", snap, DATA / "diagonal_line.json", "--out", new], capsys)
    d = json.loads(new.read_text())
    assert code == 0 and "verdict PASS" in err
    assert len(d["partition"]["classes"]) == 5 and d["info"]["evolution"][0]["verdict"] == "PASS"
    dup = tmp_path / "d.json"
    code, _, _ = run(["evolve", snap, DATA / "two_axes.json", "--out", dup], capsys)
    assert code == 0 and dup.read_text() == snap.read_text()


def test_evolve_corrupted_snapshot(tmp_path, capsys):
    snap = tmp_path / "s.json"
    run(["surrogate", DATA / "two_axes.json", "--out", snap], capsys)
    d = json.loads(snap.read_text())
    del d["partition"]
    bad = write(tmp_path, "bad.json", d)
    code, _, err = run(["evolve", bad, DATA / "diagonal_line.json"], capsys)
    assert code == 2 and "snapshot" in err


def test_converge_cover_and_control(capsys):
    code, out, _ = run(["converge", DATA / "two_axes_scenario.json"], capsys)
    rows = out.splitlines()
    assert code == 0 and rows[0] == "m,distance,r,lambda,tau,mu,covered,m_hat"
    last = rows[-1].split(",")
    assert float(last[1]) <= 1e-6 and last[-1] == "1"
    code, out, err = run(["converge", DATA / "never_covering_scenario.json"], capsys)
    assert code == 0 and "plateau" in err
    assert all(r.split(",")[-1] == "0" for r in out.splitlines()[1:])


def test_groebner_commands(tmp_path, capsys):
    code, out, _ = run(["groebner", DATA / "two_axes.json"], capsys)
    d = json.loads(out)
    assert code == 0 and d["kernel_check"] and d["generators"]
    gens = {"rank": 1, "nvars": 2, "generators": [
        [{"position": 0, "exponents": [1, 1], "coeff": "1/1"}, {"position": 0, "exponents": [0, 0], "coeff": "-1/1"}],
        [{"position": 0, "exponents": [0, 2], "coeff": "1/1"}, {"position": 0, "exponents": [1, 0], "coeff": "-1/1"}],
    ]}
    code, out, _ = run(["groebner", write(tmp_path, "g.json", gens)], capsys)
    assert code == 0 and json.loads(out)["is_groebner"]


def test_groebner_cap_exit_code(tmp_path, capsys):
    gens = {"rank": 1, "nvars": 2, "generators": [[{"position": 0, "exponents": [5, 0], "coeff": "1/1"}]]}
    code, _, err = run(["groebner", write(tmp_path, "g.json", gens)], capsys)
    assert code == 4 and "cap" in err


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "sheafopt", "glue", str(DATA / "two_axes.json")],
                       capture_output=True, text=True, timeout=60)
    assert r.returncode == 0 and json.loads(r.stdout)["point"] == [0.5, 1.0]
