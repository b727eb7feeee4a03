import json
from pathlib import Path

import pytest

from swiptplan.cli import main
from swiptplan.scenario import default_scenario, serialize_scenario


@pytest.fixture(scope="module")
def scenario_file(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("cfg") / "scenario.yaml"
    sc = default_scenario(x_max=1, n_max=4, r_max=3)
    path.write_text(serialize_scenario(sc))
    return path


def _read_summary(out_dir: Path) -> dict:
    values = {}
    for line in (out_dir / "summary.txt").read_text().splitlines():
        key, _, val = line.partition(": ")
        values[key] = val
    return values


def test_optimize_writes_artifacts(scenario_file, tmp_path, capsys):
    out = tmp_path / "run"
    code = main(["optimize", "--scenario", str(scenario_file), "--out", str(out)])
    assert code == 0
    for name in ("trajectory.csv", "phi.csv", "trace.jsonl", "summary.txt"):
        assert (out / name).exists(), name
    header = (out / "trajectory.csv").read_text().splitlines()[0]
    assert header == "l,x_m,y_m,t_s"
    assert (out / "phi.csv").read_text().splitlines()[0] == "l,m,amplitude,phase_rad"
    rows = [json.loads(line) for line in (out / "trace.jsonl").read_text().splitlines()]
    assert any(row.get("stage") == "phase" for row in rows)
    assert any(row.get("stage") == "trajectory" for row in rows)

    summary = _read_summary(out)
    total = float(summary["total_energy_j"])
    parts = (
        float(summary["flight_energy_j"])
        + float(summary["hover_energy_j"])
        + float(summary["radiated_energy_j"])
        + float(summary["ris_energy_j"])
    )
    assert total == pytest.approx(parts, rel=1e-9)
    # active accounting charges the budget at each of the L-1 hover points
    sc = default_scenario()
    assert float(summary["ris_energy_j"]) == pytest.approx(
        sc.num_hovers * sc.ris_energy_budget
    )


def test_optimize_passive_total_is_aircraft_only(scenario_file, tmp_path):
    out = tmp_path / "run_passive"
    code = main(
        ["optimize", "--scenario", str(scenario_file), "--out", str(out), "--mode", "passive"]
    )
    assert code == 0
    summary = _read_summary(out)
    assert float(summary["ris_energy_j"]) == 0.0
    assert summary["mode"] == "passive"


def test_optimize_missing_scenario_exits_2(tmp_path, capsys):
    code = main(["optimize", "--scenario", str(tmp_path / "nope.yaml"), "--out", str(tmp_path)])
    assert code == 2
    assert "scenario not found" in capsys.readouterr().err


def test_optimize_corrupt_scenario_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("power:\n  split_ratio: 1.3\n")
    code = main(["optimize", "--scenario", str(bad), "--out", str(tmp_path / "x")])
    assert code == 2
    assert "split_ratio" in capsys.readouterr().err


def test_optimize_outputs_are_deterministic(scenario_file, tmp_path):
    out1, out2 = tmp_path / "d1", tmp_path / "d2"
    assert main(["optimize", "--scenario", str(scenario_file), "--out", str(out1), "--seed", "3"]) == 0
    assert main(["optimize", "--scenario", str(scenario_file), "--out", str(out2), "--seed", "3"]) == 0
    for name in ("trajectory.csv", "phi.csv", "trace.jsonl", "summary.txt"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_validate_pass_and_insufficient(scenario_file, tmp_path, capsys):
    code = main(
        ["validate", "--scenario", str(scenario_file), "--n-samples", "20000",
         "--seed", "11", "--instances", "2"]
    )
    out = capsys.readouterr().out
    assert code == 0
    assert "worst |z|" in out

    code = main(["validate", "--scenario", str(scenario_file), "--n-samples", "10"])
    assert code == 3
    assert "insufficient samples" in capsys.readouterr().err


def test_validate_corrupt_scenario_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad2.yaml"
    bad.write_text("rf:\n  num_elements: 0\n")
    assert main(["validate", "--scenario", str(bad)]) == 2


def test_sweep_single_element(tmp_path):
    path = tmp_path / "scenario.yaml"
    sc = default_scenario(x_max=1, n_max=3, r_max=2, num_elements=8)
    path.write_text(serialize_scenario(sc))
    out = tmp_path / "sweep"
    code = main(
        ["sweep-elements", "--scenario", str(path), "--out", str(out), "--elements", "8"]
    )
    assert code == 0
    lines = (out / "fig2_data.csv").read_text().splitlines()
    assert lines[0] == "M,mode,total_energy_J"
    # one element count, both surface modes
    assert len(lines) == 3
    assert (out / "cell_M8_active" / "summary.txt").exists()
    assert (out / "cell_M8_passive" / "summary.txt").exists()
    modes = {line.split(",")[1] for line in lines[1:]}
    assert modes == {"active", "passive"}


def test_sweep_bad_elements_list(scenario_file, tmp_path, capsys):
    code = main(
        ["sweep-elements", "--scenario", str(scenario_file), "--out", str(tmp_path / "s"),
         "--elements", "a,b"]
    )
    assert code == 1
