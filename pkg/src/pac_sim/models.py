"""Pydantic models for robot descriptions, scenarios and solver settings."""

from __future__ import annotations

import sys
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

if sys.version_info >= (3, 11):
    from enum import StrEnum
else:  # pragma: no cover - Python 3.10 backport of enum.StrEnum
    from enum import Enum

    class StrEnum(str, Enum):
        def __str__(self) -> str:
            return str(self.value)

        def __format__(self, format_spec: str) -> str:
            return str(self.value).__format__(format_spec)

Vector3 = tuple[float, float, float]

LENGTH_SCALE = {"m": 1.0, "mm": 1e-3}
MASS_SCALE = {"kg": 1.0, "g": 1e-3}


class ModelKind(StrEnum):
    """Reduced-order model family."""

    PAC = "pac"
    PCC = "pcc"


class SegmentState(BaseModel):
    """Lagrangian coordinates of one segment."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    c0: float = Field(0.0, description="zero-order curvature coefficient [rad]")
    c1: float = Field(0.0, description="first-order curvature coefficient [rad]")
    phi: float = Field(0.0, description="bending-plane angle [rad]")
    delta_l: float = Field(0.0, description="axial length change [m]")

    def vector(self) -> np.ndarray:
        return np.array([self.c0, self.c1, self.phi, self.delta_l])


class RobotState(BaseModel):
    """Configuration of the whole arm, segments ordered base to tip."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    segments: list[SegmentState] = Field(min_length=1)

    @classmethod
    def zeros(cls, n: int) -> RobotState:
        return cls(segments=[SegmentState() for _ in range(n)])

    @classmethod
    def from_vector(cls, q: Any) -> RobotState:
        values = np.asarray(q, dtype=float).reshape(-1, 4)
        return cls(
            segments=[
                SegmentState(c0=a, c1=b, phi=c, delta_l=d)
                for a, b, c, d in values.tolist()
            ]
        )

    def vector(self) -> np.ndarray:
        return np.concatenate([seg.vector() for seg in self.segments])

    def __len__(self) -> int:
        return len(self.segments)


class TendonGuide(BaseModel):
    """Where a tendon runs through the guides of its segment."""

    model_config = ConfigDict(extra="forbid")

    radius: float = Field(ge=0, description="attachment radius [m]")
    azimuth: float = Field(0.0, description="angular position on the section [rad]")
    stations: list[float] = Field(
        default_factory=lambda: [1.0],
        description="guide positions along the segment, normalized s, last = 1",
    )

    @field_validator("stations")
    @classmethod
    def _check_stations(cls, value: list[float]) -> list[float]:
        if not value:
            raise ValueError("at least one guide station is required")
        if any(s < 0.0 or s > 1.0 for s in value):
            raise ValueError("guide stations must lie in [0, 1]")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("guide stations must be strictly increasing")
        if value[-1] != 1.0:
            raise ValueError("the last guide station must be 1")
        return value


class TendonRouting(TendonGuide):
    """A tendon guide bound to its owning segment."""

    segment: int = Field(ge=0, description="owning segment index (0-based)")


class SegmentParams(BaseModel):
    """Geometry and material of one segment."""

    model_config = ConfigDict(extra="forbid")

    rest_length: float = Field(gt=0, description="free length L [m]")
    radius: float = Field(gt=0, description="section radius [m]")
    mass: float = Field(0.0, ge=0, description="segment mass [kg]")
    k_bending: float = Field(gt=0, description="bending stiffness [N*m/rad^2]")
    k_torsion: float = Field(gt=0, description="bending-plane stiffness [N*m/rad^2]")
    k_axial: float = Field(gt=0, description="axial stiffness [N/m]")
    tendon_guides: list[TendonGuide] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_guides(self) -> SegmentParams:
        for guide in self.tendon_guides:
            if guide.radius > self.radius:
                raise ValueError("tendon attachment radius exceeds segment radius")
        return self


class TendonCommand(BaseModel):
    """Set-points and gains of the tendon PD loop."""

    model_config = ConfigDict(extra="forbid")

    targets: list[float] = Field(description="target tendon lengths [m]")
    target_rates: list[float] | None = Field(None, description="[m/s]")
    kp: float = Field(20.0, ge=0, description="proportional gain [N/m]")
    kd: float = Field(20.0, ge=0, description="derivative gain [N*s/m]")

    @model_validator(mode="after")
    def _check_rates(self) -> TendonCommand:
        if self.target_rates is not None and len(self.target_rates) != len(
            self.targets
        ):
            raise ValueError("target_rates must match targets in length")
        return self


class PointLoad(BaseModel):
    """A dead force (and optional couple) applied at a material point."""

    model_config = ConfigDict(extra="forbid")

    segment: int = Field(ge=0)
    s: float = Field(1.0, ge=0, le=1)
    force: Vector3 = Field((0.0, 0.0, 0.0), description="base-frame force [N]")
    moment: Vector3 = Field((0.0, 0.0, 0.0), description="base-frame couple [N*m]")


class TipMass(BaseModel):
    """A mass hung at the tip of a segment (the last one by default)."""

    model_config = ConfigDict(extra="forbid")

    mass: float = Field(ge=0, description="[kg]")
    segment: int | None = Field(None, ge=0)


class StiffnessModel(BaseModel):
    """Per-segment stiffness coefficients of the elastic field."""

    model_config = ConfigDict(extra="forbid")

    k_bending: list[float]
    k_torsion: list[float]
    k_axial: list[float]
    stiffening: float = Field(0.0, ge=0, description="contraction stiffening [1/m]")

    @classmethod
    def from_params(
        cls, params: list[SegmentParams], stiffening: float = 0.0
    ) -> StiffnessModel:
        return cls(
            k_bending=[p.k_bending for p in params],
            k_torsion=[p.k_torsion for p in params],
            k_axial=[p.k_axial for p in params],
            stiffening=stiffening,
        )

    def __len__(self) -> int:
        return len(self.k_bending)


class SolverOptions(BaseModel):
    """Settings of the damped-flow equilibrium solver."""

    model_config = ConfigDict(extra="forbid")

    damping: Literal["diagonal", "stiffness"] = "diagonal"
    damping_weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 10.0)
    damping_matrix: list[list[float]] | None = None
    method: Literal["auto", "RK45", "BDF"] = Field(
        "auto", description="stepper; auto picks BDF when the damped flow is stiff"
    )
    initial_step: float = Field(1e-2, gt=0, description="[s]")
    max_step: float = Field(0.5, gt=0, description="largest explicit step [s]")
    step_tolerance: float = Field(1e-8, gt=0)
    relative_step_tolerance: float = Field(1e-5, gt=0)
    residual_tolerance: float = Field(1e-6, gt=0, description="N-equivalent")
    max_iterations: int = Field(100_000, gt=0)
    record_path: bool = False

    @field_validator("damping_weights")
    @classmethod
    def _check_weights(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if any(w <= 0 for w in value):
            raise ValueError("damping weights must be positive")
        return value


class StaticsProblem(BaseModel):
    """Everything the quasi-static balance needs."""

    model_config = ConfigDict(extra="forbid")

    initial_state: RobotState
    segments: list[SegmentParams] = Field(min_length=1)
    stiffness: StiffnessModel
    routing: list[TendonRouting] = Field(default_factory=list)
    command: TendonCommand | None = None
    gravity: Vector3 = (0.0, 0.0, 0.0)
    loads: list[PointLoad] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_consistency(self) -> StaticsProblem:
        n = len(self.segments)
        if len(self.initial_state) != n:
            raise ValueError("initial state and segment list differ in length")
        if len(self.stiffness) != n:
            raise ValueError("stiffness model and segment list differ in length")
        for load in self.loads:
            if load.segment >= n:
                raise ValueError(f"load references missing segment {load.segment}")
        for tendon in self.routing:
            if tendon.segment >= n:
                raise ValueError(
                    f"tendon references missing segment {tendon.segment}"
                )
        if self.command is not None and len(self.command.targets) != len(
            self.routing
        ):
            raise ValueError("tendon command does not match the routing")
        return self


class Units(BaseModel):
    """Optional units header of a robot or scenario file."""

    model_config = ConfigDict(extra="forbid")

    length: Literal["m", "mm"] = "m"
    mass: Literal["kg", "g"] = "kg"


def _scaled(value: Any, factor: float) -> Any:
    if isinstance(value, list):
        return [_scaled(v, factor) for v in value]
    if isinstance(value, bool) or not isinstance(value, int | float):
        raise ValueError(f"expected a number under a units header, got {value!r}")
    return value * factor


def _scale(data: dict, key: str, factor: float) -> None:
    value = data.get(key)
    if value is not None:
        data[key] = _scaled(value, factor)


def _objects(data: dict, key: str) -> list[dict]:
    """Copies of the JSON objects listed under ``key``."""
    value = data.get(key, [])
    if not isinstance(value, list):
        raise ValueError(f"{key} must be a list")
    for i, item in enumerate(value):
        if not isinstance(item, dict):
            raise ValueError(f"{key}[{i}] must be an object")
    return [dict(item) for item in value]


def _pop_units(data: Any) -> tuple[Any, float, float]:
    if not isinstance(data, dict) or "units" not in data:
        return data, 1.0, 1.0
    data = dict(data)
    units = Units.model_validate(data.pop("units"))
    return data, LENGTH_SCALE[units.length], MASS_SCALE[units.mass]


class RobotDescription(BaseModel):
    """Contents of a robot description file (SI units after loading).

    Under a ``units`` header every length, gravity included, is in the header's
    unit and every mass in its mass unit.
    """

    model_config = ConfigDict(extra="forbid")

    segments: list[SegmentParams] = Field(min_length=1)
    tendons: list[TendonRouting] = Field(default_factory=list)
    gravity: Vector3 = Field((0.0, 0.0, -9.81), description="[m/s^2]")
    stiffening: float = Field(0.0, ge=0, description="contraction stiffening [1/m]")

    @model_validator(mode="before")
    @classmethod
    def _normalize_units(cls, data: Any) -> Any:
        data, length, mass = _pop_units(data)
        if length == 1.0 and mass == 1.0:
            return data
        if "segments" in data:
            segments = _objects(data, "segments")
            for seg in segments:
                for key in ("rest_length", "radius", "k_bending", "k_torsion"):
                    _scale(seg, key, length)
                _scale(seg, "k_axial", 1.0 / length)
                _scale(seg, "mass", mass)
                if "tendon_guides" in seg:
                    guides = _objects(seg, "tendon_guides")
                    for guide in guides:
                        _scale(guide, "radius", length)
                    seg["tendon_guides"] = guides
            data["segments"] = segments
        if "tendons" in data:
            tendons = _objects(data, "tendons")
            for tendon in tendons:
                _scale(tendon, "radius", length)
            data["tendons"] = tendons
        _scale(data, "gravity", length)
        _scale(data, "stiffening", 1.0 / length)
        return data

    @model_validator(mode="after")
    def _check_tendons(self) -> RobotDescription:
        for tendon in self.tendons:
            if tendon.segment >= len(self.segments):
                raise ValueError(
                    f"tendon references missing segment {tendon.segment}"
                )
            if tendon.radius > self.segments[tendon.segment].radius:
                raise ValueError("tendon attachment radius exceeds segment radius")
        return self

    def routing(self) -> list[TendonRouting]:
        """All tendons: per-segment guides first, then the top-level list."""
        routes = [
            TendonRouting(segment=i, **guide.model_dump())
            for i, seg in enumerate(self.segments)
            for guide in seg.tendon_guides
        ]
        return routes + list(self.tendons)


class TendonTargets(BaseModel):
    """Tendon set-points in a scenario: absolute lengths or rest-length offsets."""

    model_config = ConfigDict(extra="forbid")

    targets: list[float] | None = Field(None, description="[m]")
    offsets: list[float] | None = Field(None, description="from rest length [m]")
    kp: float = Field(20.0, ge=0, description="[N/m]")
    kd: float = Field(20.0, ge=0, description="[N*s/m]")

    @model_validator(mode="after")
    def _one_kind(self) -> TendonTargets:
        if (self.targets is None) == (self.offsets is None):
            raise ValueError("give exactly one of targets or offsets")
        return self


class ScenarioFile(BaseModel):
    """Contents of a scenario file (SI units after loading, gravity included)."""

    model_config = ConfigDict(extra="forbid")

    name: str = "scenario"
    model: ModelKind = ModelKind.PAC
    initial_state: RobotState | None = None
    tendons: TendonTargets | None = None
    loads: list[PointLoad] = Field(default_factory=list)
    tip_masses: list[TipMass] = Field(default_factory=list)
    gravity: Vector3 | None = Field(None, description="overrides the robot [m/s^2]")
    solver: SolverOptions = Field(default_factory=SolverOptions)
    output_dir: str | None = None

    @model_validator(mode="before")
    @classmethod
    def _normalize_units(cls, data: Any) -> Any:
        data, length, mass = _pop_units(data)
        if length == 1.0 and mass == 1.0:
            return data
        state = data.get("initial_state")
        if isinstance(state, dict) and "segments" in state:
            segments = _objects(state, "segments")
            for seg in segments:
                _scale(seg, "delta_l", length)
            data["initial_state"] = {**state, "segments": segments}
        tendons = data.get("tendons")
        if isinstance(tendons, dict):
            tendons = dict(tendons)
            _scale(tendons, "targets", length)
            _scale(tendons, "offsets", length)
            _scale(tendons, "kp", 1.0 / length)
            _scale(tendons, "kd", 1.0 / length)
            data["tendons"] = tendons
        if "loads" in data:
            loads = _objects(data, "loads")
            for load in loads:
                _scale(load, "moment", length)
            data["loads"] = loads
        if "tip_masses" in data:
            tips = _objects(data, "tip_masses")
            for tip in tips:
                _scale(tip, "mass", mass)
            data["tip_masses"] = tips
        _scale(data, "gravity", length)
        return data


class SweepFile(BaseModel):
    """Workspace sweep: a tendon-offset grid solved under several tip masses."""

    model_config = ConfigDict(extra="forbid")

    offsets: list[float] = Field(min_length=1, description="grid values [m]")
    tip_masses: list[float] = Field(default_factory=lambda: [0.0], min_length=1)
    kp: float = Field(20.0, ge=0, description="[N/m]")
    kd: float = Field(20.0, ge=0, description="[N*s/m]")
    model: ModelKind = ModelKind.PAC
    solver: SolverOptions = Field(default_factory=SolverOptions)
