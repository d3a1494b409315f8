import json
import subprocess
import sys

import numpy as np
import pytest

from homctl import cli, jsonio
from homctl.synthesis import validate_design


def write_json(path, payload):
    path.write_text(json.dumps(payload, indent=1))


@pytest.fixture()
def plant_config(tmp_path):
    path = tmp_path / "plant.json"
    write_json(path, {
        "version": "1",
        "A": [[0, 1, 0], [0, 0, 1], [0, 0, 0]],
        "B": [[0], [0], [1]],
        "mu": "-0.25",
        "rho": "1",
    })
    return path


@pytest.fixture()
def design_doc(tmp_path, plant_config):
    out = tmp_path / "designdir"
    assert cli.main(["design", str(plant_config), "--out", str(out)]) == 0
    return out / "design.json"


@pytest.fixture()
def db2_design_doc(tmp_path):
    path = tmp_path / "plant2.json"
    write_json(path, {
        "version": "1",
        "A": [[0, 1], [0, 0]],
        "B": [[0], [1]],
        "mu": "-0.5",
        "rho": "2",
    })
    out = tmp_path / "db2"
    assert cli.main(["design", str(path), "--out", str(out)]) == 0
    return out / "design.json"


class TestDesignCommand:
    def test_writes_valid_document(self, design_doc):
        doc = json.loads(design_doc.read_text())
        assert doc["kind"] == "design"
        assert doc["mu"] == "-0.25"
        assert np.allclose(doc["K0"], 0.0)
        assert "iterations" in doc["diagnostics"]

    def test_round_trip_revalidates(self, design_doc):
        design = jsonio.load_design(str(design_doc))
        validate_design(design)

    def test_malformed_json_exit_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{ not json }")
        assert cli.main(["design", str(bad)]) == 1
        err = capsys.readouterr().err
        assert "line" in err and "column" in err

    def test_uncontrollable_exit_2(self, tmp_path, capsys):
        path = tmp_path / "plant.json"
        write_json(path, {
            "version": "1",
            "A": [[0, 0], [0, 0]],
            "B": [[1], [0]],
            "mu": "-0.5",
            "rho": "1",
        })
        assert cli.main(["design", str(path), "--out", str(tmp_path)]) == 2
        assert "defect" in capsys.readouterr().err

    def test_override_flags(self, tmp_path, plant_config):
        out = tmp_path / "ovr"
        assert cli.main(["design", str(plant_config), "--mu", "0.25",
                         "--out", str(out)]) == 0
        doc = json.loads((out / "design.json").read_text())
        assert doc["mu"] == "0.25"
        assert np.allclose(np.diag(doc["G_d"]), [0.5, 0.75, 1.0])

    def test_cascade_config(self, tmp_path):
        path = tmp_path / "cascade.json"
        write_json(path, {
            "version": "1",
            "A": [[0, 1, 0, 1, 0], [0, 0, 1, 0, 0], [0, 0, 0, 0, 0],
                  [0, 0, 0, 0, 1], [0, 0, 0, 0, 0]],
            "B": [[0, 0], [0, 0], [1, 0], [0, 0], [0, 1]],
            "mu": ["-0.25", "-1"],
            "rho": ["1", "2"],
            "block_dims": [3, 2],
        })
        out = tmp_path / "casc"
        assert cli.main(["design", str(path), "--out", str(out)]) == 0
        doc = json.loads((out / "design.json").read_text())
        assert doc["kind"] == "cascade_design"
        assert len(doc["blocks"]) == 2
        cascade = jsonio.load_design(str(out / "design.json"))
        assert cascade.m == 2


class TestCertifyCommand:
    def test_pass_verdict_and_outputs(self, tmp_path, db2_design_doc):
        out = tmp_path / "cert"
        assert cli.main(["certify", str(db2_design_doc), "--grid", "64",
                         "--out", str(out)]) == 0
        doc = json.loads((out / "certificate.json").read_text())
        assert doc["verdict"] == "pass"
        assert len(doc["grid"]) == 64
        lines = (out / "certificate.csv").read_text().splitlines()
        assert lines[0] == "delta,lambda_min"
        assert len(lines) == 65

    def test_grid_override_respected(self, tmp_path, db2_design_doc):
        out = tmp_path / "cert2"
        assert cli.main(["certify", str(db2_design_doc), "--grid", "16",
                         "--out", str(out)]) == 0
        doc = json.loads((out / "certificate.json").read_text())
        assert len(doc["lambda_min"]) == 16

    def test_broken_design_exit_2(self, tmp_path, db2_design_doc, capsys):
        doc = json.loads(db2_design_doc.read_text())
        doc["X"] = [[1.0, 5.0], [5.0, 1.0]]
        broken = tmp_path / "broken.json"
        write_json(broken, doc)
        assert cli.main(["certify", str(broken), "--out", str(tmp_path)]) == 2

    def test_cascade_document_rejected(self, tmp_path, cascade52, capsys):
        doc_path = tmp_path / "cascade.json"
        write_json(doc_path, jsonio.cascade_to_jsonable(cascade52))
        assert cli.main(["certify", str(doc_path), "--out", str(tmp_path)]) == 2
        assert "per block" in capsys.readouterr().err


class TestSimulateCommand:
    def test_finite_time_run(self, tmp_path, design_doc):
        out = tmp_path / "simrun"
        assert cli.main(["simulate", str(design_doc), "--scheme", "consistent",
                         "--h", "0.05", "--T", "12", "--x0", "1,-1,0",
                         "--out", str(out)]) == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["settling_time"] is not None
        assert metrics["settling_time"] <= 4.9
        assert metrics["chattering_index"] == 0.0
        header = (out / "trajectory.csv").read_text().splitlines()[0]
        assert header == "t,x1,x2,x3,u1,hom_norm"
        meta = json.loads((out / "trajectory_meta.json").read_text())
        assert meta["scheme"] == "consistent"

    def test_explicit_run_chatters(self, tmp_path, design_doc):
        out = tmp_path / "simexp"
        assert cli.main(["simulate", str(design_doc), "--scheme", "explicit",
                         "--h", "0.05", "--T", "12", "--x0", "1,-1,0",
                         "--threshold", "1e-6", "--out", str(out)]) == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["settling_time"] is None
        assert metrics["chattering_index"] > 0.0

    def test_divergence_exit_2_with_note(self, tmp_path, plant_config, capsys):
        out0 = tmp_path / "fx"
        assert cli.main(["design", str(plant_config), "--mu", "0.25",
                         "--out", str(out0)]) == 0
        out = tmp_path / "simdiv"
        code = cli.main(["simulate", str(out0 / "design.json"),
                         "--scheme", "explicit", "--h", "0.2", "--T", "30",
                         "--x0", "70000,-70000,0", "--out", str(out)])
        assert code == 2
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["diverged"] is True
        assert "note" in metrics

    def test_reproducible_outputs(self, tmp_path, design_doc):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert cli.main(["simulate", str(design_doc), "--h", "0.05",
                             "--T", "4", "--x0", "1,-1,0", "--qp", "0.05",
                             "--qm", "0.001", "--seed", "7",
                             "--out", str(out)]) == 0
            outs.append((out / "trajectory.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_cascade_metrics(self, tmp_path, cascade52):
        doc_path = tmp_path / "cascade_design.json"
        write_json(doc_path, jsonio.cascade_to_jsonable(cascade52))
        out = tmp_path / "simcasc"
        assert cli.main(["simulate", str(doc_path), "--h", "0.05", "--T", "12",
                         "--x0", "1,-1,0,1,0", "--out", str(out)]) == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert len(metrics["block_settling_times"]) == 2
        assert all(v is not None for v in metrics["block_settling_times"])


class TestCompareCommand:
    def test_consistent_vs_explicit(self, tmp_path, design_doc):
        out = tmp_path / "cmp"
        assert cli.main(["compare", str(design_doc),
                         "--schemes", "consistent,explicit", "--h", "0.05",
                         "--T", "12", "--x0", "1,-1,0", "--threshold", "1e-6",
                         "--out", str(out)]) == 0
        lines = (out / "comparison.csv").read_text().splitlines()
        assert lines[0].startswith("scheme,h,")
        rows = {ln.split(",")[0]: ln.split(",") for ln in lines[1:]}
        assert rows["consistent"][2] != ""      # settles
        assert rows["explicit"][2] == ""        # never settles
        assert float(rows["explicit"][3]) > 10.0 * max(
            float(rows["consistent"][3]), 1e-12)

    def test_fixed_time_large_step_contrast(self, tmp_path, plant_config):
        # large sampling step: the consistent scheme still converges into a
        # small ball, the explicit one degrades badly
        out0 = tmp_path / "fxtd"
        assert cli.main(["design", str(plant_config), "--mu", "0.25",
                         "--out", str(out0)]) == 0
        out = tmp_path / "cmpfxt"
        assert cli.main(["compare", str(out0 / "design.json"),
                         "--schemes", "consistent,explicit", "--h", "0.2",
                         "--T", "30", "--x0", "110,-110,0",
                         "--out", str(out)]) == 0
        lines = (out / "comparison.csv").read_text().splitlines()
        rows = {ln.split(",")[0]: ln.split(",") for ln in lines[1:]}
        assert float(rows["consistent"][4]) < 1.0
        assert int(rows["consistent"][6]) == 0
        assert int(rows["explicit"][6]) == 1 or \
            float(rows["explicit"][4]) > 1e6

    def test_single_row(self, tmp_path, design_doc):
        out = tmp_path / "cmp1"
        assert cli.main(["compare", str(design_doc), "--schemes", "consistent",
                         "--h", "0.1", "--T", "6", "--x0", "1,-1,0",
                         "--out", str(out)]) == 0
        lines = (out / "comparison.csv").read_text().splitlines()
        assert len(lines) == 2

    def test_threaded_rows_sorted(self, tmp_path, design_doc, monkeypatch):
        monkeypatch.setenv("HOMCTL_THREADS", "4")
        out = tmp_path / "cmpthr"
        assert cli.main(["compare", str(design_doc),
                         "--schemes", "explicit,consistent",
                         "--h", "0.1,0.05", "--T", "6", "--x0", "1,-1,0",
                         "--out", str(out)]) == 0
        lines = (out / "comparison.csv").read_text().splitlines()[1:]
        keys = [(ln.split(",")[0], float(ln.split(",")[1])) for ln in lines]
        assert keys == sorted(keys)


class TestEntryPoint:
    def test_console_script_help(self):
        proc = subprocess.run([sys.executable, "-m", "homctl.cli", "--help"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "design" in proc.stdout and "certify" in proc.stdout

    def test_missing_file_exit_1(self, capsys):
        assert cli.main(["design", "nope.json"]) == 1
