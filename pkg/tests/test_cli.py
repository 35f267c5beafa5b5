import json
import subprocess
import sys

import pytest

from lipfree import __version__
from lipfree.cli import main, parse_schedule, UsageError
from lipfree.documents import dendrogram_document, dumps, matrix_document
from lipfree.random_spaces import C4, L3, U4


@pytest.fixture
def docs(tmp_path):
    out = {}
    for name, make in (("U4", U4), ("L3", L3), ("C4", C4)):
        p = tmp_path / f"{name}.json"
        p.write_text(dumps(matrix_document(make())))
        out[name] = str(p)
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    out["bad"] = str(bad)
    broken = tmp_path / "broken.json"
    broken.write_text(dumps({"schema": 1, "format": "matrix", "labels": ["0", "1", "3"],
                             "dist": [[0, 1, 5], [1, 0, 2], [5, 2, 0]]}))
    out["broken"] = str(broken)
    return out


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def report(capsys, *argv):
    code, out = run(capsys, *argv)
    return code, json.loads(out)


def test_validate(capsys, docs):
    code, rep = report(capsys, "validate", "--input", docs["U4"])
    assert code == 0 and rep["results"]["ultrametric"] and rep["results"]["four_point"]
    assert rep["tool"] == "lipfree" and rep["version"] == __version__ and len(rep["input_sha256"]) == 64
    code, rep = report(capsys, "validate", "--input", docs["C4"])
    assert code == 0 and rep["results"]["four_point"] is False
    assert len(rep["results"]["four_point_witness"]["points"]) == 4
    code, rep = report(capsys, "validate", "--input", docs["broken"])
    assert code == 1 and rep["status"] == "failed"
    assert rep["results"]["witnesses"][0]["kind"] == "triangle"
    assert main(["validate", "--input", docs["bad"]]) == 2
    assert main(["validate", "--input", docs["bad"] + ".missing"]) == 2


def test_norm(capsys, docs):
    assert report(capsys, "norm", "-i", docs["U4"], "--masses", "a:1,b:-1")[1]["results"]["value"] == 1.0
    assert report(capsys, "norm", "-i", docs["U4"], "--masses", "a:1")[1]["results"]["value"] == 4.0
    code, rep = report(capsys, "norm", "-i", docs["L3"], "--masses", "1:1,3:1")
    res = rep["results"]
    assert code == 0 and res["value"] == 4.0 and res["gap"] == 0.0
    assert res["potential"] == {"0": 0.0, "1": 1.0, "3": 3.0}
    assert main(["norm", "-i", docs["U4"], "--masses", "zz:1"]) == 2
    assert main(["norm", "-i", docs["U4"], "--masses", "a=1"]) == 2
    assert main(["norm", "-i", docs["broken"], "--masses", "1:1"]) == 1


def test_separate(capsys, docs):
    code, rep = report(capsys, "separate", "-i", docs["U4"], "a", "b")
    assert code == 0 and rep["results"]["method"] == "ultrametric" and rep["results"]["lip_bound"] == 2.0
    code, rep = report(capsys, "separate", "-i", docs["L3"], "1", "3")
    res = rep["results"]
    assert code == 0 and res["lip_bound"] <= 4 and res["method"] == "proper"
    assert all(res["checks"].values()) and res["phi"]["lipschitz"] <= 2
    code, rep = report(capsys, "separate", "-i", docs["U4"], "--proper", "--stop-size", "1", "a", "c")
    assert code == 0 and rep["results"]["method"] == "proper"
    code, _ = run(capsys, "separate", "-i", docs["L3"], "--ultra", "1", "3")
    assert code == 1
    assert main(["separate", "-i", docs["L3"], "1", "1"]) == 2
    assert main(["separate", "-i", docs["L3"], "--ultra", "--proper", "1", "3"]) == 2
    assert main(["separate", "-i", docs["L3"], "--stop-size", "-1", "1", "3"]) == 2


def test_project(capsys, docs):
    code, out = run(capsys, "project", "-i", docs["U4"], "--masses", "b:1", "--schedule", "1:4,0.5:4")
    lines = out.splitlines()
    assert code == 0 and lines[0].startswith("# lipfree")
    assert lines[1:] == ["r,n,err,bound", "1.0,4.0,1.0,1.0", "0.5,4.0,0.0,0.5"]
    code, out = run(capsys, "project", "-i", docs["U4"])
    assert code == 0 and all(line.split(",")[2] == "0.0" for line in out.splitlines()[2:])
    assert len(out.splitlines()) == 2 + 8
    code, rep = report(capsys, "project", "-i", docs["U4"], "--masses", "b:1", "--format", "json")
    assert code == 0 and len(rep["results"]["rows"]) == 8
    code, _ = run(capsys, "project", "-i", docs["L3"], "--masses", "1:1")
    assert code == 1
    assert main(["project", "-i", docs["U4"], "--schedule", "1:x"]) == 2
    assert main(["project", "-i", docs["U4"], "--schedule", "0:4"]) == 2


def test_embed(capsys, docs):
    code, rep = report(capsys, "embed", "-i", docs["L3"], "--epsilon", "0.5", "--function", "0,1,3")
    r = rep["results"]["reports"][0]
    assert code == 0 and r["sup_norm"] == 1.0 == r["lip"] and r["lower_slack"] == 0.0
    code, rep = report(capsys, "embed", "-i", docs["L3"], "--function", "1:1,3:3")
    assert rep["results"]["reports"][0]["function"] == {"0": 0.0, "1": 1.0, "3": 3.0}
    code, rep = report(capsys, "embed", "-i", docs["U4"], "--random", "10", "--seed", "4")
    assert code == 0 and rep["results"]["seed"] == 4 and len(rep["results"]["reports"]) == 10
    assert all(r["lower_ok"] and r["upper_ok"] for r in rep["results"]["reports"])
    for eps in ("1.5", "0", "abc"):
        assert main(["embed", "-i", docs["L3"], "--epsilon", eps]) == 2
    assert main(["embed", "-i", docs["L3"], "--function", "1,1,3"]) == 2
    assert main(["embed", "-i", docs["L3"], "--function", "0,1"]) == 2


def test_output_file_and_timing(capsys, docs, tmp_path):
    out = tmp_path / "r.json"
    assert main(["norm", "-i", docs["U4"], "--masses", "a:1", "-o", str(out), "--timing"]) == 0
    rep = json.loads(out.read_text())
    assert rep["results"]["value"] == 4.0 and rep["timing"]["seconds"] >= 0
    assert capsys.readouterr().out == ""


def test_usage_errors(capsys):
    assert main([]) == 2
    assert main(["bogus"]) == 2
    with pytest.raises(UsageError):
        parse_schedule("1;2")


def test_dendrogram_input_and_module_entry(tmp_path):
    p = tmp_path / "d.json"
    p.write_text(dumps(dendrogram_document(["0", "a", "b", "c"], [[1, 2, 1.0], [4, 3, 2.0], [0, 5, 4.0]])))
    res = subprocess.run([sys.executable, "-m", "lipfree", "validate", "-i", str(p)], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["results"]["ultrametric"] is True


def test_repeated_runs_identical(docs):
    outs = []
    for _ in range(2):
        res = subprocess.run(
            [sys.executable, "-m", "lipfree", "embed", "-i", docs["U4"], "--random", "5", "--seed", "7"],
            capture_output=True,
        )
        assert res.returncode == 0
        outs.append(res.stdout)
    assert outs[0] == outs[1]
