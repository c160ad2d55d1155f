import csv
import json
import subprocess
import sys

import pytest

from branchpoly import caseio, cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.mark.parametrize("s, e, kind, m", [("16", "0.1", "irregular", 20), ("220", "0.3", "regular", 61)])
def test_polygon_csv(capsys, tmp_path, s, e, kind, m):
    code, out, _ = run(capsys, "polygon", "--s", s, "--e", e, "--kind", kind, "--out", str(tmp_path))
    assert code == 0 and out.strip() == str(m)
    stem = f"polygon_{kind}_s{float(s):g}_e{float(e):g}"
    cons = _rows(tmp_path / f"{stem}_constraints.csv")
    verts = _rows(tmp_path / f"{stem}_vertices.csv")
    assert cons[0] == ["branch_id", "side_index", "a", "b", "c"] and len(cons) == m + 1
    assert verts[0] == ["vertex", "p", "q"] and len(verts) == m + 1
    assert [float(x) for x in verts[1][1:]] == pytest.approx([0.0, float(s)])


def test_polygon_json(capsys, tmp_path):
    code, out, _ = run(capsys, "polygon", "--s", "16", "--e", "0.1", "--format", "json",
                       "--out", str(tmp_path))
    assert code == 0
    cons = json.loads((tmp_path / "polygon_irregular_s16_e0.1_constraints.json").read_text())
    verts = json.loads((tmp_path / "polygon_irregular_s16_e0.1_vertices.json").read_text())
    assert len(cons) == len(verts) == 20
    assert set(cons[0]) == {"branch_id", "side_index", "a", "b", "c"}
    assert {"p": 16.0, "q": 0.0, "vertex": 16} in verts


def test_polygon_domain_error(capsys, tmp_path):
    code, _, err = run(capsys, "polygon", "--s", "16", "--e", "16.1", "--out", str(tmp_path))
    assert code == 1
    assert "error exceeds radius" in err
    assert len(err.strip().splitlines()) == 1


def test_usage_errors(capsys):
    assert run(capsys, "polygon", "--s", "16")[0] == 1
    assert run(capsys, "frobnicate")[0] == 1
    code, _, err = run(capsys, "tables", "table2")
    assert code == 1 and "--case" in err


def test_table1(capsys, tmp_path):
    code, out, _ = run(capsys, "tables", "table1", "--out", str(tmp_path))
    assert code == 0
    rows = _rows(tmp_path / "table1.csv")
    assert rows[0] == ["e_mva", "regular_16", "regular_220", "regular_880", "regular_1800",
                       "irregular_16", "irregular_220", "irregular_880", "irregular_1800"]
    assert rows[1] == ["0.1", "29", "105", "209", "299", "20", "68", "136", "192"]
    assert rows[2] == ["0.2", "20", "74", "148", "211", "16", "48", "96", "136"]
    assert rows[3] == ["0.3", "17", "61", "121", "173", "12", "40", "80", "112"]
    assert "1800" in out


def test_table2(capsys, tmp_path):
    code, _, err = run(capsys, "tables", "table2", "--case", "case30", "--case", "case118",
                       "--out", str(tmp_path))
    assert code == 0
    rows = {(r[0], r[1]): r[2:] for r in _rows(tmp_path / "table2.csv")[1:]}
    assert rows["0.2", "irregular"] == ["952", "0"]
    assert rows["0.1", "irregular"] == ["1288", "0"]
    assert "case118 has 186 in-service branches with no rating" in err


def test_table2_missing_case(capsys, tmp_path):
    code, _, err = run(capsys, "tables", "table2", "--case", str(tmp_path / "nope.m"),
                       "--out", str(tmp_path))
    assert code == 1 and "nope.m" in err


def test_profile(capsys, tmp_path):
    code, out, _ = run(capsys, "profile", "--s", "16", "--mq", "10", "--out", str(tmp_path))
    assert code == 0 and out.strip() == "40"
    rows = _rows(tmp_path / "profile_s16_mq10_sides.csv")
    assert rows[0] == ["side", "delta_theta", "length", "sagitta"] and len(rows) == 41
    sag = [float(r[3]) for r in rows[1:]]
    length = [float(r[2]) for r in rows[1:]]
    assert {k + 1 for k, v in enumerate(sag) if v <= min(sag) * (1 + 1e-9)} == {10, 11, 30, 31}
    assert {k + 1 for k, v in enumerate(length) if v >= max(length) * (1 - 1e-9)} == {1, 20, 21, 40}
    sweep = _rows(tmp_path / "profile_sweep.csv")
    assert sweep[0][:4] == ["s_mva", "e_min", "mq", "m_irr"]
    assert {r[0] for r in sweep[1:]} == {"16", "220", "880", "1800"}
    assert len(sweep) == 1 + 4 * 31


def test_profile_by_error_matches_mq(capsys, tmp_path):
    run(capsys, "profile", "--s", "16", "--e", "0.1", "--out", str(tmp_path / "a"))
    run(capsys, "profile", "--s", "16", "--mq", "5", "--out", str(tmp_path / "b"))
    a = (tmp_path / "a" / "profile_s16_mq5_sides.csv").read_text()
    assert a == (tmp_path / "b" / "profile_s16_mq5_sides.csv").read_text()


def test_opf_two_bus(capsys, tmp_path):
    code, out, _ = run(capsys, "opf", "--case", "2bus", "--e", "0.1", "--out", str(tmp_path))
    assert code == 0 and out.strip() == "500.000000"
    sol = json.loads((tmp_path / "opf_case2bus_irregular_e0.1.json").read_text())
    assert sol["objective"] == pytest.approx(500)
    assert sol["normalized_flows"][0]["p"] == pytest.approx(0.5)
    flows = _rows(tmp_path / "opf_case2bus_irregular_e0.1_flows.csv")
    assert flows[0][0] == "branch"
    report = json.loads((tmp_path / "opf_case2bus_irregular_e0.1_report.json").read_text())
    assert report["error"] is None
    assert set(report["timings_ms"]) == {"parse", "build", "solve"}
    assert all(v >= 0 for v in report["timings_ms"].values())
    assert report["summary"]["objective"] == pytest.approx(500)


def test_opf_regular_vs_irregular_case30(capsys, tmp_path):
    objs = {}
    for kind in ("regular", "irregular"):
        code, out, _ = run(capsys, "opf", "--case", "case30", "--e", "0.01", "--kind", kind,
                           "--out", str(tmp_path))
        assert code == 0
        objs[kind] = float(out)
    assert abs(objs["irregular"] - objs["regular"]) <= 0.01 * objs["regular"]


def test_opf_missing_case_writes_report(capsys, tmp_path):
    code, _, err = run(capsys, "opf", "--case", str(tmp_path / "ghost.m"), "--e", "0.1",
                       "--out", str(tmp_path))
    assert code == 1 and "ghost" in err
    report = json.loads((tmp_path / "opf_ghost_irregular_e0.1_report.json").read_text())
    assert "ghost" in report["error"]


def test_opf_infeasible_exit_2(capsys, tmp_path):
    text = caseio.resolve_case("2bus").read_text().replace("\t2\t1\t50\t10", "\t2\t1\t500\t10")
    path = tmp_path / "overload.m"
    path.write_text(text)
    code, _, err = run(capsys, "opf", "--case", str(path), "--e", "0.1", "--out", str(tmp_path))
    assert code == 2 and "infeasible" in err
    report = json.loads((tmp_path / "opf_overload_irregular_e0.1_report.json").read_text())
    assert "infeasible" in report["error"]


def test_env_output_dir(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("BRANCHPOLY_OUT", str(tmp_path / "env"))
    code, _, _ = run(capsys, "tables", "table1")
    assert code == 0 and (tmp_path / "env" / "table1.csv").exists()
    run(capsys, "tables", "table1", "--out", str(tmp_path / "flag"))
    assert (tmp_path / "flag" / "table1.csv").exists()


def test_deterministic_outputs(capsys, tmp_path):
    for sub in ("a", "b"):
        run(capsys, "opf", "--case", "case9", "--e", "0.2", "--kind", "regular",
            "--out", str(tmp_path / sub))
    name = "opf_case9_regular_e0.2.json"
    assert (tmp_path / "a" / name).read_text() == (tmp_path / "b" / name).read_text()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "branchpoly", "polygon", "--s", "16", "--e", "0.1",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "20"
