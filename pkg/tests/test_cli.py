import json

import pytest

from heatplan.cli import main
from heatplan.io import load_assignment, load_cells, read_cells, table1_path


@pytest.fixture(scope="module")
def city(tmp_path_factory):
    out = tmp_path_factory.mktemp("city")
    assert main(["synth", "--n", "120", "--seed", "4", "--out", str(out)]) == 0
    return out / "cells.csv"


def test_synth_writes_instance(city, capsys, tmp_path):
    cells = load_cells(city)
    assert len(cells) == 120
    assert main(["synth", "--n", "120", "--seed", "4", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "cells.csv").read_bytes() == city.read_bytes()
    assert "config: command=synth" in capsys.readouterr().out


def test_solve_then_validate(city, tmp_path, capsys):
    out = tmp_path / "robust"
    assert main(["solve", "--cells", str(city), "--delta-el", "0.5", "--delta-h2", "2.0",
                 "--budget", "30000", "--out", str(out)]) == 0
    assert (out / "plan.csv").exists() and (out / "plan.geojson").exists()
    printed = capsys.readouterr().out
    assert "config:" in printed and "delta_h2=2.0" in printed and "budget_kw=30000.0" in printed
    assert main(["validate", "--cells", str(city), "--samples", "2000", "--seed", "3", "--budget", "30000",
                 "--plan", str(out / "plan.csv"), "--out", str(out)]) == 0
    report = json.loads((out / "validation.json").read_text())
    assert report["margin"] >= 0 and report["violations"] == 0 and report["n_samples"] == 2000


def test_solve_is_byte_identical(city, tmp_path):
    for run in ("a", "b"):
        assert main(["solve", "--cells", str(city), "--delta-el", "0", "--delta-h2", "0",
                     "--out", str(tmp_path / run)]) == 0
    for name in ("plan.csv", "plan.geojson"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_nominal_matches_zero_deviation(city, tmp_path):
    assert main(["solve", "--nominal", "--cells", str(city), "--out", str(tmp_path / "n")]) == 0
    assert main(["solve", "--cells", str(city), "--delta-el", "0", "--delta-h2", "0",
                 "--out", str(tmp_path / "z")]) == 0
    assert (tmp_path / "n" / "plan.csv").read_bytes() == (tmp_path / "z" / "plan.csv").read_bytes()


@pytest.mark.parametrize("solver", ["bb", "brute"])
def test_other_solvers(tmp_path, solver):
    cells = tmp_path / "cells.csv"
    assert main(["synth", "--n", "8", "--seed", "1", "--out", str(tmp_path)]) == 0
    assert main(["solve", "--cells", str(cells), "--budget", "5000", "--out", str(tmp_path / "dp")]) == 0
    assert main(["solve", "--cells", str(cells), "--budget", "5000", "--solver", solver,
                 "--out", str(tmp_path / solver)]) == 0
    assert load_assignment(tmp_path / "dp" / "plan.csv") == load_assignment(tmp_path / solver / "plan.csv")


def test_sweep(city, tmp_path, monkeypatch):
    monkeypatch.setenv("HEATPLAN_THREADS", "2")
    assert main(["sweep", "--cells", str(city), "--h2-from", "0", "--h2-to", "2.0", "--step", "0.5",
                 "--delta-el", "0.5", "--budget", "30000", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert len(lines) == 1 + 5
    objectives = [float(line.split(",")[-2]) for line in lines[1:]]
    assert objectives == sorted(objectives)


def test_export_lp(city, tmp_path):
    assert main(["export-lp", "--cells", str(city), "--out", str(tmp_path)]) == 0
    text = (tmp_path / "model.lp").read_text()
    assert text.count(" one_") == 120 and "budget:" in text and text.endswith("End\n")
    assert main(["export-lp", "--cells", str(city), "--lockin-threshold", "100", "--out", str(tmp_path / "q")]) == 0
    assert "bigm_0_ce" in (tmp_path / "q" / "model.lp").read_text()


def test_custom_params_and_infinite_budget(city, tmp_path):
    params = tmp_path / "params.json"
    doc = json.loads(table1_path().read_text())
    doc["delta_hydrogen"] = 0.0
    params.write_text(json.dumps(doc))
    assert main(["solve", "--cells", str(city), "--params", str(params), "--budget", "inf",
                 "--out", str(tmp_path)]) == 0


@pytest.mark.parametrize("argv", [
    ["solve"],
    ["solve", "--bogus"],
    ["frobnicate"],
    [],
    ["solve", "--cells", "x.csv", "--budget", "lots"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "usage" in capsys.readouterr().err


def test_invalid_input_exit_1(tmp_path, capsys):
    bad = tmp_path / "cells.csv"
    bad.write_text("cell_id,heat_kwh_a,peak_kw,street_m,has_dh\na,100,1,1,2\n")
    assert main(["solve", "--cells", str(bad), "--out", str(tmp_path)]) == 1
    assert "has_dh must be 0 or 1" in capsys.readouterr().err
    assert main(["solve", "--cells", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 1
    brute = tmp_path / "big.csv"
    brute.write_text("cell_id,heat_kwh_a,peak_kw,street_m,has_dh\n"
                     + "".join(f"k{i},100,1,1,0\n" for i in range(13)))
    assert read_cells(brute.read_text())
    assert main(["solve", "--cells", str(brute), "--solver", "brute", "--out", str(tmp_path)]) == 1
