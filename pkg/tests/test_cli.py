import csv
import json

import pytest

from irf.cli import main


@pytest.fixture
def small_csv(tmp_path):
    path = tmp_path / "pts.csv"
    rows = ["id,a,b,lab"] + [f"r{i},{i * 0.37 % 5},{(i * i) % 7 + 0.1 * i},{'x' if i > 36 else 'n'}"
                             for i in range(40)]
    path.write_text("\n".join(rows) + "\n")
    return path


def test_detect_happy_path(tmp_path, small_csv, capsys):
    out = tmp_path / "scores.csv"
    code = main(["detect", "--input", str(small_csv), "--features", "a,b", "--id-col", "id",
                 "--method", "dirf", "--confidence", "90", "--quantiles", "4", "--seed", "7",
                 "--output", str(out)])
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 40 and rows[0]["id"] == "r0"
    assert sum(int(r["flag_4"]) for r in rows) == 2
    assert "flagged 2 of 40" in capsys.readouterr().out


def test_detect_json_with_labels(small_csv, capsys):
    code = main(["detect", "--input", str(small_csv), "--features", "a,b", "--label-col", "lab",
                 "--positive-class", "x", "--trees", "50", "--format", "json"])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["scores"]) == 40 and len(doc["labelled"]) == 3
    assert doc["trials"] == 50


def test_usage_errors(small_csv, capsys):
    assert main(["detect"]) == 2
    assert "--input" in capsys.readouterr().err
    assert main(["detect", "--input", str(small_csv), "--bogus"]) == 2
    sel = ["--features", "a,b", "--id-col", "id"]
    assert main(["detect", "--input", str(small_csv), *sel, "--quantiles", "0"]) == 2
    assert main(["detect", "--input", str(small_csv), *sel, "--label-col", "lab"]) == 2
    assert main(["nonsense"]) == 2


def test_data_and_compute_errors(tmp_path, capsys):
    assert main(["detect", "--input", str(tmp_path / "missing.csv")]) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("a\n1\nabc\n")
    assert main(["detect", "--input", str(bad)]) == 3
    tiny = tmp_path / "tiny.csv"
    tiny.write_text("a\n1\n2\n3\n")
    assert main(["detect", "--input", str(tiny), "--confidence", "90"]) == 4
    assert "explicit" in capsys.readouterr().err


def test_compare_on_bundled_data(tmp_path):
    out = tmp_path / "diff.csv"
    code = main(["compare", "--input", "@wdbc_benchmark", "--trees", "200", "--output", str(out),
                 "--report-dir", str(tmp_path / "rep")])
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 2 + 7
    assert all(len(ln.split(",")) == 17 for ln in lines[1:])
    assert (tmp_path / "rep" / "irf.csv").exists() and (tmp_path / "rep" / "dirf_long.csv").exists()


def test_oracle_commands(tmp_path, capsys):
    assert main(["oracle", "--lengths", "1,1,1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["count"] == 5 and abs(doc["total_probability"] - 1) < 1e-12
    pts = tmp_path / "p.csv"
    pts.write_text("x,y\n0,0\n1,2\n3,1\n")
    assert main(["oracle", "--input", str(pts)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["count"] == doc["cardinality_formula"] == 8
    assert main(["oracle", "--counterexample", "4", "--trees", "2000"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["distance_ratio"] > 1000
    assert main(["oracle", "--counterexample", "2"]) == 2
    assert main(["oracle", "--lengths", "1,-1"]) == 3


def test_variance_table(capsys):
    assert main(["variance-table", "--j", "1,2"]) == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert [r["n"] for r in rows] == ["3", "9"] and rows[0]["published"] == "0.25"
    assert main(["variance-table", "--sizes", "4", "--definition", "point", "--format", "json"]) == 0
    assert json.loads(capsys.readouterr().out)[0]["method"] == "enumeration"


def test_probe_command(tmp_path):
    out = tmp_path / "probe.json"
    assert main(["probe-complexity", "--sizes", "1,100,300", "--format", "json",
                 "--output", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert [r["n"] for r in doc["rows"]] == [1, 100, 300] and doc["exponent"] is not None
