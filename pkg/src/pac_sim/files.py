"""Robot, scenario, sweep and marker files; CSV and JSON result writers."""

from __future__ import annotations

import csv
import json
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import TypeVar

import numpy as np
from pydantic import BaseModel, ValidationError

from pac_sim.actuation import tendon_lengths
from pac_sim.models import (
    ModelKind,
    PointLoad,
    RobotDescription,
    RobotState,
    ScenarioFile,
    StaticsProblem,
    StiffnessModel,
    SweepFile,
    TendonCommand,
)
from pac_sim.oracle import MarkerSet

MARKER_HEADER = ["segment", "s", "x", "y", "z"]
SEED_CURVATURE = 1e-3

ModelT = TypeVar("ModelT", bound=BaseModel)


class InputError(Exception):
    """Raised for unreadable, malformed or inconsistent input files."""


def _describe(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        where = ".".join(str(p) for p in item["loc"]) or "<root>"
        parts.append(f"{where}: {item['msg']}")
    return "; ".join(parts)


def load_document(path: Path, model: type[ModelT]) -> ModelT:
    """Parse a JSON file into ``model`` with line-level diagnostics."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InputError(f"{path}: cannot read file ({e.strerror})") from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e
    try:
        return model.model_validate(raw)
    except ValidationError as e:
        raise InputError(f"{path}: {_describe(e)}") from e


def load_robot(path: Path) -> RobotDescription:
    return load_document(path, RobotDescription)


def load_scenario(path: Path) -> ScenarioFile:
    return load_document(path, ScenarioFile)


def load_sweep(path: Path) -> SweepFile:
    return load_document(path, SweepFile)


def load_markers(path: Path, segments: int | None = None) -> MarkerSet:
    """Marker CSV with header ``segment,s,x,y,z`` (meters, base frame).

    Given the robot's segment count, every marker must lie on the robot and one
    must sit at the tip.
    """
    try:
        handle = Path(path).open(newline="")
    except OSError as e:
        raise InputError(f"{path}: cannot read file ({e.strerror})") from e
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != MARKER_HEADER:
            raise InputError(
                f"{path}:1: expected columns {','.join(MARKER_HEADER)}, got {header}"
            )
        rows = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MARKER_HEADER):
                raise InputError(f"{path}:{line}: expected 5 values, got {len(row)}")
            try:
                rows.append((int(row[0]), *(float(v) for v in row[1:])))
            except ValueError as e:
                raise InputError(f"{path}:{line}: {e}") from e
    if not rows:
        raise InputError(f"{path}: no markers")
    data = np.array(rows, dtype=float)
    if np.any(data[:, 0] < 0) or np.any((data[:, 1] < 0) | (data[:, 1] > 1)):
        raise InputError(f"{path}: marker segment or s out of range")
    if segments is not None:
        if np.any(data[:, 0] >= segments):
            raise InputError(f"{path}: markers reference a segment beyond {segments - 1}")
        tip = (data[:, 0] == segments - 1) & np.isclose(data[:, 1], 1.0)
        if not np.any(tip):
            raise InputError(f"{path}: no tip marker (segment {segments - 1}, s = 1)")
    return MarkerSet(
        segments=data[:, 0].astype(int), stations=data[:, 1], positions=data[:, 2:]
    )


def parse_state(text: str, segments: int) -> RobotState:
    """A state given as ``c0,c1,phi,dL`` repeated per segment."""
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise InputError(f"--state: {e}") from e
    if len(values) != 4 * segments:
        raise InputError(
            f"--state needs {4 * segments} values for {segments} segments, got {len(values)}"
        )
    return RobotState.from_vector(values)


def check_mode(state: RobotState, model: ModelKind) -> None:
    if model is ModelKind.PCC and any(seg.c1 != 0.0 for seg in state.segments):
        raise InputError("PCC mode requires c1 = 0 in every segment")


def rest_tendon_lengths(robot: RobotDescription) -> np.ndarray:
    routing = robot.routing()
    if not routing:
        return np.zeros(0)
    return tendon_lengths(RobotState.zeros(len(robot.segments)), routing, robot.segments)


def tendon_command(
    robot: RobotDescription,
    targets: Sequence[float] | None,
    offsets: Sequence[float] | None,
    kp: float,
    kd: float,
) -> TendonCommand:
    count = len(robot.routing())
    values = targets if targets is not None else offsets
    if values is None or len(values) != count:
        raise InputError(f"tendon set-points must list {count} values")
    if targets is None:
        values = (rest_tendon_lengths(robot) + np.asarray(offsets)).tolist()
    return TendonCommand(targets=list(values), kp=kp, kd=kd)


def seed_state(robot: RobotDescription, offsets: Sequence[float]) -> RobotState:
    """Straight start, each segment bent slightly toward its net tendon pull.

    phi is undefined on a straight segment, so a sweep started exactly straight
    could stall on the symmetric branch.
    """
    q = np.zeros((len(robot.segments), 4))
    pull = np.zeros((len(robot.segments), 2))
    for tendon, offset in zip(robot.routing(), offsets):
        pull[tendon.segment] += offset * np.array(
            [np.cos(tendon.azimuth), np.sin(tendon.azimuth)]
        )
    for k, (px, py) in enumerate(pull):
        if np.hypot(px, py) > 1e-12 * max(1.0, np.abs(offsets).max()):
            q[k, 0] = SEED_CURVATURE
            q[k, 2] = np.arctan2(py, px)
    return RobotState.from_vector(q)


def build_problem(
    robot: RobotDescription,
    scenario: ScenarioFile,
    tip_masses: Iterable[tuple[float, int | None]] = (),
    command: TendonCommand | None = None,
) -> StaticsProblem:
    """Assemble the statics problem; tip masses become dead loads m * g."""
    n = len(robot.segments)
    gravity = scenario.gravity if scenario.gravity is not None else robot.gravity
    state = scenario.initial_state or RobotState.zeros(n)
    check_mode(state, scenario.model)
    if command is None and scenario.tendons is not None:
        tendons = scenario.tendons
        command = tendon_command(
            robot, tendons.targets, tendons.offsets, tendons.kp, tendons.kd
        )
    masses = [(t.mass, t.segment) for t in scenario.tip_masses] + list(tip_masses)
    loads = list(scenario.loads)
    for mass, segment in masses:
        if mass == 0.0:
            continue
        loads.append(
            PointLoad(
                segment=n - 1 if segment is None else segment,
                s=1.0,
                force=tuple(mass * g for g in gravity),
            )
        )
    try:
        return StaticsProblem(
            initial_state=state,
            segments=robot.segments,
            stiffness=StiffnessModel.from_params(robot.segments, robot.stiffening),
            routing=robot.routing(),
            command=command,
            gravity=gravity,
            loads=loads,
        )
    except ValidationError as e:
        raise InputError(f"scenario {scenario.name!r}: {_describe(e)}") from e


def fmt(value: float) -> str:
    """Fixed 9-significant-digit formatting; -0 prints as 0."""
    return f"{float(value) + 0.0:.9g}"


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [fmt(v) if isinstance(v, (float, np.floating)) else v for v in row]
            )
    return path


def write_json(path: Path, data: object) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, BaseModel):
        text = data.model_dump_json(indent=2)
    else:
        text = json.dumps(data, indent=2, sort_keys=True)
    path.write_text(text + "\n")
    return path


def write_state(path: Path, state: RobotState) -> Path:
    rows = [
        (i, seg.c0, seg.c1, seg.phi, seg.delta_l)
        for i, seg in enumerate(state.segments)
    ]
    return write_csv(path, ["segment", "c0", "c1", "phi", "delta_l"], rows)


def write_centerline(path: Path, labels: np.ndarray, points: np.ndarray) -> Path:
    rows = [
        (int(k), float(s), *map(float, p)) for (k, s), p in zip(labels, points)
    ]
    return write_csv(path, MARKER_HEADER, rows)
