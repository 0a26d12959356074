"""Shared test fixtures."""

from pathlib import Path

import numpy as np
import pytest

from pac_sim.models import (
    RobotDescription,
    RobotState,
    SegmentParams,
    StaticsProblem,
    StiffnessModel,
    TendonGuide,
)

DATA = Path(__file__).resolve().parent.parent / "data"

THREE_WAY = [0.0, 2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0]


@pytest.fixture()
def data_dir() -> Path:
    return DATA


@pytest.fixture()
def section() -> SegmentParams:
    """Single soft section, free length 270.8 mm, 1.078 N/mm axial."""
    return SegmentParams(
        rest_length=0.2708,
        radius=0.04,
        mass=0.1,
        k_bending=0.3,
        k_torsion=0.3,
        k_axial=1078.0,
    )


@pytest.fixture()
def stiff_section() -> SegmentParams:
    return SegmentParams(
        rest_length=0.2708,
        radius=0.04,
        mass=0.1,
        k_bending=3.0,
        k_torsion=3.0,
        k_axial=1078.0,
    )


@pytest.fixture()
def tendon_section() -> SegmentParams:
    stations = [k / 20 for k in range(1, 21)]
    return SegmentParams(
        rest_length=0.2708,
        radius=0.04,
        mass=0.1,
        k_bending=0.3,
        k_torsion=0.3,
        k_axial=1078.0,
        tendon_guides=[
            TendonGuide(radius=0.03, azimuth=a, stations=stations) for a in THREE_WAY
        ],
    )


@pytest.fixture()
def arm() -> list[SegmentParams]:
    """Three modules of 135.4 mm free length."""
    return [
        SegmentParams(
            rest_length=0.1354,
            radius=0.035,
            mass=0.05,
            k_bending=5.0,
            k_torsion=5.0,
            k_axial=1078.0,
        )
        for _ in range(3)
    ]


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def random_state(rng: np.random.Generator, n: int, bend: float = 2.0) -> np.ndarray:
    """Random configuration with moderate curvature and small length change."""
    q = np.empty((n, 4))
    q[:, 0] = rng.uniform(-bend, bend, n)
    q[:, 1] = rng.uniform(-bend, bend, n)
    q[:, 2] = rng.uniform(-np.pi, np.pi, n)
    q[:, 3] = rng.uniform(-0.02, 0.02, n)
    return q.ravel()


def make_problem(params: list[SegmentParams], **fields) -> StaticsProblem:
    """Statics problem from rest with the segments' own stiffness."""
    robot = RobotDescription(segments=params)
    fields.setdefault("initial_state", RobotState.zeros(len(params)))
    fields.setdefault("stiffness", StiffnessModel.from_params(params))
    fields.setdefault("routing", robot.routing())
    return StaticsProblem(segments=params, **fields)
