"""Job-file front end: spec'd example jobs, exit codes, determinism,
serialization round trips."""

import json
import subprocess
import sys

import pytest

from jetnf.cli import main, run_file
from jetnf.jets import Jet, MapJet, VariableSpace, jet_from_polynomial
from jetnf.serialize import (
    jet_from_json,
    jet_to_json,
    map_from_json,
    map_to_json,
)

C1 = VariableSpace.constrained(1)
S1 = VariableSpace.symplectic(1)


def write_job(tmp_path, name, job):
    path = tmp_path / name
    path.write_text(json.dumps(job), encoding="utf-8")
    return str(path)


def jet_json(space, order, terms):
    return jet_to_json(jet_from_polynomial(space, order, terms))


def test_serialization_round_trip():
    j = jet_from_polynomial(C1, 5, {"x^2": 1, "q1*y": -2, "p1": "3/7"})
    back = jet_from_json(jet_to_json(j), C1, 5)
    assert back == j
    m = MapJet(S1, [jet_from_polynomial(S1, 4, {"p1": 2}),
                    jet_from_polynomial(S1, 4, {"q1": "1/2", "q1^2": 1})])
    back_m = map_from_json(map_to_json(m), S1, 4)
    assert all(a == b for a, b in zip(back_m.components, m.components))


def test_glancing_job(tmp_path, capsys):
    job = {
        "command": "glancing-check",
        "space": {"kind": "constrained", "n": 1},
        "order": 6,
        "inputs": {
            "f": jet_json(C1, 6, {"y": 1}),
            "h": jet_json(C1, 6, {"x^2": 1, "y": 1, "p1": 1}),
        },
    }
    path = write_job(tmp_path, "job.json", job)
    code = main(["--input", path])
    out = capsys.readouterr().out
    assert code == 0
    report = json.loads(out)
    assert report["status"] == "success"
    assert report["outputs"]["glancing"]["in_s1"] is True


def test_normalize_diffeo_identity_job(tmp_path, capsys):
    ident = MapJet.identity(S1, 5)
    job = {
        "command": "normalize-diffeo",
        "space": {"kind": "symplectic", "n": 1},
        "order": 5,
        "inputs": {"map": [jet_to_json(c) for c in ident.components]},
    }
    path = write_job(tmp_path, "job.json", job)
    code = main(["--input", path])
    report = json.loads(capsys.readouterr().out)
    assert code == 0
    q1 = jet_from_json(report["outputs"]["invariants"]["Q1"], S1, 5)
    assert q1.truncate(4) == Jet.variable(S1, "q1", 4)
    assert report["residuals"]["symplectomorphism"]["zero"]


def test_normalize_pair_melrose_exit_2(tmp_path, capsys):
    job = {
        "command": "normalize-pair",
        "space": {"kind": "constrained", "n": 1},
        "order": 6,
        "inputs": {
            "f": jet_json(C1, 6, {"y": 1}),
            "h": jet_json(C1, 6, {"x^2": 1, "y": 1, "p1": 1}),
        },
    }
    path = write_job(tmp_path, "job.json", job)
    code = main(["--input", path])
    report = json.loads(capsys.readouterr().out)
    assert code == 2
    assert report["status"] == "error"
    assert report["error"]["type"] == "GenericityViolation"
    assert report["error"]["condition"]


def test_normalize_pair_worked_example(tmp_path, capsys):
    job = {
        "command": "normalize-pair",
        "space": {"kind": "constrained", "n": 1},
        "order": 6,
        "inputs": {
            "f": jet_json(C1, 6, {"y": 1}),
            "h": jet_json(C1, 6, {"x^2": 1, "y": 1, "p1": 1, "q1*y": 1}),
        },
    }
    path = write_job(tmp_path, "job.json", job)
    code = main(["--input", path])
    report = json.loads(capsys.readouterr().out)
    assert code == 0
    r = jet_from_json(report["outputs"]["r"], C1, 6)
    assert r.truncate(3) == Jet.variable(C1, "y", 3)
    assert all(res["zero"] for res in report["residuals"].values())
    assert any("upper limit" in w for w in report["warnings"])


def test_order_floor_enforced(tmp_path, capsys):
    job = {
        "command": "normalize-pair",
        "space": {"kind": "constrained", "n": 1},
        "order": 3,
        "inputs": {"f": jet_json(C1, 3, {"y": 1}),
                   "h": jet_json(C1, 3, {"x^2": 1, "y": 1, "p1": 1, "q1*y": 1})},
    }
    path = write_job(tmp_path, "job.json", job)
    code = main(["--input", path])
    report = json.loads(capsys.readouterr().out)
    assert code == 1
    assert "2n+2" in report["error"]["message"]


def test_malformed_job_exit_1(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json", encoding="utf-8")
    code = main(["--input", str(path)])
    report = json.loads(capsys.readouterr().out)
    assert code == 1
    assert report["error"]["type"] == "ParseError"


def test_bad_coefficient_exit_1(tmp_path, capsys):
    job = {
        "command": "glancing-check",
        "space": {"kind": "constrained", "n": 1},
        "order": 4,
        "inputs": {"f": [["1", "0", [0, 1, 0, 0]]],
                   "h": jet_json(C1, 4, {"x^2": 1})},
    }
    path = write_job(tmp_path, "job.json", job)
    code = main(["--input", path])
    assert code == 1


def test_poincare_job(tmp_path, capsys):
    job = {"command": "poincare", "n": 2, "max_order": 2, "seed": 1}
    path = write_job(tmp_path, "job.json", job)
    code = main(["--input", path])
    report = json.loads(capsys.readouterr().out)
    assert code == 0
    assert report["outputs"]["dims"] == [0, 6, 26]
    assert report["outputs"]["closed_form_dims"] == [0, 6, 30]
    assert report["outputs"]["agreement"] == [True, True, False]
    assert report["warnings"]


def test_byte_identical_reports(tmp_path):
    job = {
        "command": "parametrize-form",
        "space": {"kind": "symplectic", "n": 1},
        "order": 4,
        "seed": 3,
        "inputs": {"form": [[[0, 1], jet_json(S1, 4, {"": 2, "q1^2": 1})]]},
    }
    path = write_job(tmp_path, "job.json", job)
    rep1, code1 = run_file(path)
    rep2, code2 = run_file(path)
    assert code1 == code2 == 0
    s1 = json.dumps(rep1, sort_keys=True)
    s2 = json.dumps(rep2, sort_keys=True)
    assert s1 == s2


def test_report_round_trip_recertifies(tmp_path):
    job = {
        "command": "normalize-diffeo",
        "space": {"kind": "symplectic", "n": 1},
        "order": 5,
        "inputs": {"map": [jet_json(S1, 5, {"p1": 2}),
                           jet_json(S1, 5, {"q1": "1/2", "q1^2": "1/3"})]},
    }
    path = write_job(tmp_path, "job.json", job)
    report, code = run_file(path)
    assert code == 0
    normalizer = map_from_json(report["outputs"]["normalizer"], S1, 5)
    from jetnf.symplectic import SymplecticFormJet, is_symplectomorphism
    omega = SymplecticFormJet.standard(S1, normalizer.order)
    assert is_symplectomorphism(normalizer, omega).ok


def test_km_form_job(tmp_path, capsys):
    job = {
        "command": "km-form",
        "space": {"kind": "constrained", "n": 1},
        "order": 6,
        "inputs": {
            "f": jet_json(C1, 6, {"y": 1}),
            "h": jet_json(C1, 6, {"x^2": 1, "y": 1, "p1": 1, "q1*y": 1}),
        },
    }
    path = write_job(tmp_path, "job.json", job)
    code = main(["--input", path])
    report = json.loads(capsys.readouterr().out)
    assert code == 0
    imp = report["outputs"]["implicit_form"]
    quasi = VariableSpace.quasi(1)
    r_hat = jet_from_json(imp["r_hat"], quasi, 6)
    assert r_hat.truncate(3) == Jet.variable(quasi, "y", 3)


def test_text_format(tmp_path, capsys):
    job = {"command": "poincare", "n": 1, "max_order": 3}
    path = write_job(tmp_path, "job.json", job)
    code = main(["--input", path, "--format", "text"])
    out = capsys.readouterr().out
    assert code == 0
    assert "status: success" in out


def test_jobs_directory_fanout(tmp_path):
    for i, n in enumerate((1, 2)):
        write_job(tmp_path, f"job{i}.json",
                  {"command": "poincare", "n": n, "max_order": 2})
    outdir = tmp_path / "reports"
    code = main(["--jobs", str(tmp_path), "--output", str(outdir),
                 "--workers", "2"])
    assert code == 0
    reports = sorted(outdir.glob("*.report.json"))
    assert len(reports) == 2
    data = json.loads(reports[0].read_text())
    assert data["status"] == "success"


def test_console_entry_point(tmp_path):
    job = {"command": "poincare", "n": 1, "max_order": 2}
    path = write_job(tmp_path, "job.json", job)
    proc = subprocess.run(
        [sys.executable, "-m", "jetnf.cli", "--input", path],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["outputs"]["dims"] == [0, 1, 3]
