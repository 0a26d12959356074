"""Tests for the CLI module."""

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from conftest import DATA
from pac_sim.cli import EXIT_INPUT, EXIT_OK, main, run

ARM = str(DATA / "arm.json")
SECTION = str(DATA / "section.json")
SCENARIOS = DATA / "scenarios"
GOLDEN = Path(__file__).parent / "data" / "golden"


def _rows(path: Path) -> list[dict[str, str]]:
    with path.open(newline="") as handle:
        return list(csv.DictReader(handle))


def test_fk_of_straight_arm(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    assert run(["fk", "--robot", ARM, "--out", str(tmp_path)]) == EXIT_OK
    lines = (tmp_path / "centerline.csv").read_text().splitlines()
    assert lines[0] == "segment,s,x,y,z"
    assert lines[-1] == "2,1,0,0,0.4062"
    assert "0 0 0.4062" in capsys.readouterr().out


def test_fk_with_state(tmp_path: Path):
    state = ",".join(["1.0,0.0,0.0,0.0"] * 3)
    assert run(["fk", "--robot", ARM, "--state", state, "--out", str(tmp_path)]) == EXIT_OK
    last = _rows(tmp_path / "centerline.csv")[-1]
    assert float(last["x"]) > 0.0
    assert float(last["z"]) < 0.4062


def test_fk_pcc_rejects_affine_state(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    state = ",".join(["0.0,0.1,0.0,0.0"] * 3)
    args = ["fk", "--robot", ARM, "--model", "pcc", "--state", state, "--out", str(tmp_path)]
    assert run(args) == EXIT_INPUT
    assert "c1 = 0" in capsys.readouterr().err


def test_empty_robot_is_an_input_error(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    robot = tmp_path / "robot.json"
    robot.write_text('{"segments": []}')
    assert run(["fk", "--robot", str(robot), "--out", str(tmp_path)]) == EXIT_INPUT
    assert "Error:" in capsys.readouterr().err


def test_malformed_robot_exits_via_main(tmp_path: Path):
    robot = tmp_path / "robot.json"
    robot.write_text("{\n  'segments': []\n}")
    with pytest.raises(SystemExit) as info:
        main(["fk", "--robot", str(robot), "--out", str(tmp_path)])
    assert info.value.code == EXIT_INPUT


def test_statics_at_rest(tmp_path: Path):
    scenario = str(SCENARIOS / "arm_rest.json")
    assert run(["statics", "--robot", ARM, "--scenario", scenario, "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "arm_rest_state.csv").read_text().splitlines()
    assert lines == ["segment,c0,c1,phi,delta_l", "0,0,0,0,0", "1,0,0,0,0", "2,0,0,0,0"]
    report = json.loads((tmp_path / "arm_rest_report.json").read_text())
    assert report["converged"] is True
    assert report["iterations"] == 0
    assert report["tip_translation"] == ["0", "0", "0.4062"]


def test_statics_needs_a_scenario(tmp_path: Path):
    assert run(["statics", "--robot", ARM, "--out", str(tmp_path)]) == EXIT_INPUT


def test_heavier_tip_mass_sags_further(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    names = ["arm_tip_0g", "arm_tip_200g", "arm_tip_400g"]
    args = ["statics", "--robot", ARM, "--out", str(tmp_path), "--workers", "2"]
    for name in names:
        args += ["--scenario", str(SCENARIOS / f"{name}.json")]
    assert run(args) == EXIT_OK
    tips = []
    for name in names:
        report = json.loads((tmp_path / f"{name}_report.json").read_text())
        assert float(report["residual_norm"]) < 1e-6
        tips.append(float(report["tip_translation"][0]))
    assert tips[0] > tips[1] > tips[2]
    assert tips[0] < 0.0
    assert capsys.readouterr().out.count("steps") == 3


def test_statics_output_is_reproducible(tmp_path: Path):
    scenario = str(SCENARIOS / "section_pull.json")
    for out in ("one", "two"):
        args = ["statics", "--robot", SECTION, "--scenario", scenario]
        assert run([*args, "--out", str(tmp_path / out)]) == EXIT_OK
    for name in ("section_pull_state.csv", "section_pull_centerline.csv"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()
    state = _rows(tmp_path / "one" / "section_pull_state.csv")[0]
    assert float(state["c0"]) > 0.0


def test_workspace_shrinks_under_tip_mass(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    sweep = tmp_path / "sweep.json"
    sweep.write_text(
        json.dumps({"offsets": [0.0, 0.01], "tip_masses": [0.0, 0.5], "kp": 100.0, "kd": 20.0})
    )
    args = ["workspace", "--robot", SECTION, "--sweep", str(sweep), "--out", str(tmp_path)]
    assert run(args) == EXIT_OK
    rows = _rows(tmp_path / "workspace.csv")
    assert len(rows) == 16
    assert all(row["status"] == "ok" for row in rows)
    assert all(float(row["residual"]) < 1e-6 for row in rows)
    volumes = []
    for mass in ("0", "0.5"):
        cloud = np.array(
            [[float(row[k]) for k in "xyz"] for row in rows if row["tip_mass"] == mass]
        )
        volumes.append(np.prod(cloud.max(axis=0) - cloud.min(axis=0)))
    assert volumes[0] > 0.0
    assert volumes[1] <= volumes[0]
    assert (tmp_path / "workspace.svg").exists()
    assert "8 points" in capsys.readouterr().out


def test_workspace_rejects_empty_offsets(tmp_path: Path):
    sweep = tmp_path / "sweep.json"
    sweep.write_text('{"offsets": []}')
    args = ["workspace", "--robot", SECTION, "--sweep", str(sweep), "--out", str(tmp_path)]
    assert run(args) == EXIT_INPUT


def test_workspace_needs_tendons(tmp_path: Path):
    args = ["workspace", "--robot", ARM, "--sweep", str(DATA / "sweep.json")]
    assert run([*args, "--out", str(tmp_path)]) == EXIT_INPUT


def test_compare_lateral_loads(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    args = ["compare", "--robot", SECTION, "--out", str(tmp_path)]
    for force in ("0.4", "0.8", "1.2"):
        args += ["--scenario", str(SCENARIOS / f"section_lateral_{force}.json")]
    assert run(args) == EXIT_OK
    rows = _rows(tmp_path / "compare.csv")
    assert len(rows) == 6
    ratios = [float(row["pac_pcc_ratio"]) for row in rows if row["model"] == "pac"]
    assert np.mean(ratios) <= 0.7
    for row in rows:
        assert float(row["orientation_geodesic"]) >= 0.0
    assert (tmp_path / "compare_section_lateral_0.8.svg").exists()
    assert "Mean PAC/PCC tip-error ratio" in capsys.readouterr().out


def test_compare_with_bad_marker_header(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    markers = tmp_path / "markers.csv"
    markers.write_text("x,y,z\n0,0,0.27\n")
    args = [
        "compare",
        "--robot",
        SECTION,
        "--scenario",
        str(SCENARIOS / "section_unloaded.json"),
        "--markers",
        str(markers),
        "--out",
        str(tmp_path),
    ]
    assert run(args) == EXIT_INPUT
    assert "segment,s,x,y,z" in capsys.readouterr().err


def test_schema(capsys: pytest.CaptureFixture[str]):
    assert run(["schema", "scenario"]) == EXIT_OK
    schema = json.loads(capsys.readouterr().out)
    assert "tip_masses" in schema["properties"]


def test_fk_matches_golden_centerline(tmp_path: Path):
    assert run(["fk", "--robot", ARM, "--out", str(tmp_path)]) == EXIT_OK
    golden = (GOLDEN / "centerline.csv").read_bytes()
    assert (tmp_path / "centerline.csv").read_bytes() == golden


@pytest.mark.parametrize(
    "name", ["state.csv", "state.json", "report.json", "centerline.csv"]
)
def test_statics_matches_golden_files(tmp_path: Path, name: str):
    scenario = str(SCENARIOS / "arm_rest.json")
    args = ["statics", "--robot", ARM, "--scenario", scenario, "--out", str(tmp_path)]
    assert run(args) == EXIT_OK
    golden = (GOLDEN / f"arm_rest_{name}").read_bytes()
    assert (tmp_path / f"arm_rest_{name}").read_bytes() == golden


def test_compare_output_is_reproducible(tmp_path: Path):
    for out in ("one", "two"):
        args = ["compare", "--robot", SECTION, "--out", str(tmp_path / out)]
        args += ["--scenario", str(SCENARIOS / "section_lateral_0.8.json")]
        assert run(args) == EXIT_OK
    one = (tmp_path / "one" / "compare.csv").read_bytes()
    assert one == (tmp_path / "two" / "compare.csv").read_bytes()


def test_compare_rejects_model_flag(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    args = ["compare", "--robot", SECTION, "--model", "pcc", "--out", str(tmp_path)]
    args += ["--scenario", str(SCENARIOS / "section_lateral_0.8.json")]
    assert run(args) == EXIT_INPUT
    assert "--model" in capsys.readouterr().err


def test_compare_markers_need_a_tip(tmp_path: Path, capsys: pytest.CaptureFixture[str]):
    markers = tmp_path / "markers.csv"
    markers.write_text("segment,s,x,y,z\n0,0.5,0,0,0.07\n")
    args = ["compare", "--robot", SECTION, "--markers", str(markers), "--out", str(tmp_path)]
    args += ["--scenario", str(SCENARIOS / "section_unloaded.json")]
    assert run(args) == EXIT_INPUT
    assert "tip marker" in capsys.readouterr().err


@pytest.mark.parametrize("workers", ["0", "-1"])
def test_workers_must_be_positive(tmp_path: Path, workers: str):
    args = ["fk", "--robot", ARM, "--workers", workers, "--out", str(tmp_path)]
    assert run(args) == EXIT_INPUT


@pytest.mark.parametrize(
    "segment",
    ['5', '{"rest_length": "135", "radius": 8.0}'],
)
def test_malformed_mm_robot_is_an_input_error(tmp_path: Path, segment: str):
    robot = tmp_path / "robot.json"
    robot.write_text(f'{{"units": {{"length": "mm"}}, "segments": [{segment}]}}')
    assert run(["fk", "--robot", str(robot), "--out", str(tmp_path)]) == EXIT_INPUT


def test_workspace_volume_shrinks_with_each_load(tmp_path: Path):
    sweep = tmp_path / "sweep.json"
    sweep.write_text(
        json.dumps(
            {"offsets": [0.0, 0.01], "tip_masses": [0.0, 0.5, 1.0], "kp": 100.0, "kd": 20.0}
        )
    )
    args = ["workspace", "--robot", SECTION, "--sweep", str(sweep), "--out", str(tmp_path)]
    assert run(args) == EXIT_OK
    rows = _rows(tmp_path / "workspace.csv")
    assert len(rows) == 24
    volumes = []
    for mass in ("0", "0.5", "1"):
        cloud = np.array(
            [[float(row[k]) for k in "xyz"] for row in rows if row["tip_mass"] == mass]
        )
        assert len(cloud) == 8
        volumes.append(np.prod(cloud.max(axis=0) - cloud.min(axis=0)))
    assert volumes[0] > 0.0
    assert np.all(np.diff(volumes) <= 1e-12)
