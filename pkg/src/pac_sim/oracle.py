"""Dense-rod ground truth, curve fitting and PAC/PCC comparison.

The dense rod is a cantilevered chain of short links. Every node carries a
two-angle bending joint (R_j = R_{j-1} R_x(a_j) R_y(b_j)) and every link an
axial strain. Equilibrium is found by shooting on the base moment: for dead
loads the force carried by each cut is known up front, so a moment guess at the
clamp fixes all joint angles one after the other and the free-end condition
M_N = 0 closes the problem.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import least_squares, root

from pac_sim.actuation import tendon_force
from pac_sim.geometry import RigidTransform
from pac_sim.kinematics import (
    central_difference,
    central_stack,
    chain_frames,
    point_pose,
    rest_lengths,
    robot_fk,
    segment_points,
)
from pac_sim.models import (
    ModelKind,
    PointLoad,
    RobotState,
    SegmentParams,
    SolverOptions,
    StaticsProblem,
    TendonCommand,
    TendonRouting,
)
from pac_sim.solver import free_coordinates, solve_statics

logger = logging.getLogger(__name__)

MIN_ELEMENTS = 100
GRADIENT_TOL = 1e-8
TENSION_TOL = 1e-10
MARKER_STATIONS = (0.5, 1.0)


class OracleError(Exception):
    """Raised when the dense rod, a fit or a comparison cannot be completed."""


def _rx(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _ry(b: float) -> np.ndarray:
    c, s = math.cos(b), math.sin(b)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _cross(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.array(
        [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ]
    )


def _after(values: np.ndarray) -> np.ndarray:
    """out[j] = sum of values[i] for i >= j + 1, for j = 0..len-2."""
    total = np.cumsum(values[::-1], axis=0)[::-1]
    return total[1:]


@dataclass
class RodTendon:
    """A tendon of the dense rod, guided at every node from ``start`` to ``end``."""

    start: int
    end: int
    offset: np.ndarray
    tension: float = 0.0


@dataclass
class DenseRod:
    """Discretized rod: per-element properties plus its current configuration."""

    element_lengths: np.ndarray
    bending: np.ndarray
    axial: np.ndarray
    masses: np.ndarray
    segment_nodes: np.ndarray
    base: RigidTransform = field(default_factory=RigidTransform.identity)
    joints: np.ndarray | None = None
    strains: np.ndarray | None = None
    positions: np.ndarray = field(init=False, repr=False)
    rotations: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if np.any(np.diff(self.segment_nodes) < MIN_ELEMENTS):
            raise OracleError(f"dense rod needs at least {MIN_ELEMENTS} elements per segment")
        if self.joints is None:
            self.joints = np.zeros((self.size, 2))
        if self.strains is None:
            self.strains = np.zeros(self.size)
        self.positions, self.rotations = self._pose()

    @classmethod
    def from_params(
        cls,
        params: Sequence[SegmentParams],
        elements_per_segment: int = 200,
        base: RigidTransform | None = None,
    ) -> DenseRod:
        """Uniform discretization with EI = k_bending L and EA = k_axial L."""
        if elements_per_segment < MIN_ELEMENTS:
            raise OracleError(f"dense rod needs at least {MIN_ELEMENTS} elements per segment")
        count = elements_per_segment
        return cls(
            element_lengths=np.repeat([p.rest_length / count for p in params], count),
            bending=np.repeat([p.k_bending * p.rest_length for p in params], count),
            axial=np.repeat([p.k_axial * p.rest_length for p in params], count),
            masses=np.repeat([p.mass / count for p in params], count),
            segment_nodes=np.arange(len(params) + 1) * count,
            base=base or RigidTransform.identity(),
        )

    @property
    def size(self) -> int:
        return self.element_lengths.size

    def _pose(self) -> tuple[np.ndarray, np.ndarray]:
        # rotations[i] is the frame of the element arriving at node i.
        positions = np.empty((self.size + 1, 3))
        rotations = np.empty((self.size + 1, 3, 3))
        positions[0] = self.base.translation
        rotations[0] = self.base.rotation
        for j in range(self.size):
            a, b = self.joints[j]
            rotations[j + 1] = rotations[j] @ _rx(a) @ _ry(b)
            positions[j + 1] = positions[j] + (
                (1.0 + self.strains[j]) * self.element_lengths[j] * rotations[j + 1][:, 2]
            )
        return positions, rotations

    def node_index(self, segment: int, s: float) -> int:
        if not 0 <= segment < self.segment_nodes.size - 1:
            raise OracleError(f"segment {segment} is not part of the rod")
        start, stop = self.segment_nodes[segment], self.segment_nodes[segment + 1]
        return int(start + round(s * (stop - start)))

    def point(self, segment: int, s: float) -> tuple[np.ndarray, np.ndarray | None]:
        """Position and cross-section rotation of the material point (segment, s)."""
        i = self.node_index(segment, s)
        return self.positions[i], self.rotations[i]

    def curve(self) -> np.ndarray:
        return self.positions.copy()

    def stations(self) -> np.ndarray:
        """(segment, s) label of every node; the base node belongs to segment 0."""
        labels = np.empty((self.size + 1, 2))
        labels[0] = (0, 0.0)
        for k in range(self.segment_nodes.size - 1):
            start, stop = self.segment_nodes[k], self.segment_nodes[k + 1]
            idx = np.arange(start + 1, stop + 1)
            labels[idx, 0] = k
            labels[idx, 1] = (idx - start) / (stop - start)
        return labels

    def rod_tendons(
        self, routing: Sequence[TendonRouting], tensions: Sequence[float] | None = None
    ) -> list[RodTendon]:
        tensions = np.zeros(len(routing)) if tensions is None else np.asarray(tensions)
        if tensions.size != len(routing):
            raise OracleError("one tension per tendon is required")
        return [
            RodTendon(
                start=int(self.segment_nodes[t.segment]),
                end=int(self.segment_nodes[t.segment + 1]),
                offset=t.radius * np.array([math.cos(t.azimuth), math.sin(t.azimuth), 0.0]),
                tension=float(tension),
            )
            for t, tension in zip(routing, tensions)
        ]

    def guide_points(self, tendon: RodTendon) -> np.ndarray:
        nodes = slice(tendon.start, tendon.end + 1)
        return self.positions[nodes] + self.rotations[nodes] @ tendon.offset

    def tendon_lengths(self, routing: Sequence[TendonRouting]) -> np.ndarray:
        return np.array(
            [
                np.linalg.norm(np.diff(self.guide_points(t), axis=0), axis=1).sum()
                for t in self.rod_tendons(routing)
            ]
        )


def _node_loads(
    rod: DenseRod, loads: Sequence[PointLoad], gravity: Sequence[float]
) -> tuple[np.ndarray, np.ndarray]:
    forces = np.zeros((rod.size + 1, 3))
    couples = np.zeros((rod.size + 1, 3))
    half = 0.5 * rod.masses[:, None] * np.asarray(gravity, dtype=float)
    forces[:-1] += half
    forces[1:] += half
    for load in loads:
        i = rod.node_index(load.segment, load.s)
        forces[i] += load.force
        couples[i] += load.moment
    return forces, couples


def _shoot(
    rod: DenseRod,
    carried: np.ndarray,
    couples: np.ndarray,
    tendons: Sequence[RodTendon],
    moment0: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """March from the clamp; returns the free-end moment, joints and strains.

    ``carried[j]`` is the dead force on the nodes distal to joint j.
    """
    joints = np.zeros((rod.size, 2))
    strains = np.zeros(rod.size)
    rot = rod.base.rotation.copy()
    pos = rod.base.translation.copy()
    moment = np.array(moment0, dtype=float)
    directions = {id(t): None for t in tendons}
    for j in range(rod.size):
        ds = rod.element_lengths[j]
        stiffness = rod.bending[j] / ds
        active = [t for t in tendons if t.start <= j < t.end and t.tension > 0.0]
        guides = {id(t): pos + rot @ t.offset for t in active}
        for t in active:
            if directions[id(t)] is None:
                directions[id(t)] = rot[:, 2].copy()
        for _ in range(100):
            total = moment.copy()
            cut = carried[j].copy()
            for t in active:
                u = directions[id(t)]
                # The tendon crossing this cut acts as -T u through its guide.
                total -= t.tension * _cross(guides[id(t)] - pos, u)
                cut -= t.tension * u
            a = rot[:, 0] @ total / stiffness
            partial = rot @ _rx(a)
            b = partial[:, 1] @ total / stiffness
            nxt = partial @ _ry(b)
            strain = nxt[:, 2] @ cut / rod.axial[j]
            pos_next = pos + (1.0 + strain) * ds * nxt[:, 2]
            change = 0.0
            for t in active:
                chord = pos_next + nxt @ t.offset - guides[id(t)]
                u = chord / np.linalg.norm(chord)
                change = max(change, float(np.abs(u - directions[id(t)]).max()))
                directions[id(t)] = u
            if change < 1e-15:
                break
        joints[j] = (a, b)
        strains[j] = strain
        moment = moment - _cross(pos_next - pos, carried[j]) - couples[j + 1]
        pos, rot = pos_next, nxt
    return moment, joints, strains


def _load_scale(
    rod: DenseRod, forces: np.ndarray, couples: np.ndarray, tendons: Sequence[RodTendon]
) -> float:
    length = float(rod.element_lengths.sum())
    scale = np.abs(forces).sum() + np.abs(couples).sum() / length
    scale += sum(t.tension for t in tendons)
    return float(scale + rod.bending.mean() / length**2)


def equilibrium_gradient(
    rod: DenseRod,
    loads: Sequence[PointLoad] = (),
    gravity: Sequence[float] = (0.0, 0.0, 0.0),
    tendons: Sequence[RodTendon] = (),
) -> np.ndarray:
    """Energy gradient over (a_j, b_j, strain_j), shape (N, 3).

    Evaluated directly from node positions with suffix sums, independent of
    the shooting recursion.
    """
    forces, couples = _node_loads(rod, loads, gravity)
    points = [rod.positions]
    applied = [forces]
    for t in tendons:
        guides = np.zeros((rod.size + 1, 3))
        guides[t.start : t.end + 1] = rod.guide_points(t)
        chords = np.diff(guides[t.start : t.end + 1], axis=0)
        units = chords / np.linalg.norm(chords, axis=1)[:, None]
        pulls = np.zeros((rod.size + 1, 3))
        pulls[t.start : t.end] += t.tension * units
        pulls[t.start + 1 : t.end + 1] -= t.tension * units
        points.append(guides)
        applied.append(pulls)
    carried = sum(_after(f) for f in applied)
    first = sum(_after(np.cross(x, f)) for x, f in zip(points, applied))
    moment = first - np.cross(rod.positions[:-1], carried) + _after(couples)

    stiffness = rod.bending / rod.element_lengths
    a, b = rod.joints[:, 0], rod.joints[:, 1]
    prev = rod.rotations[:-1]
    axis_a = prev[:, :, 0]
    axis_b = np.einsum(
        "nij,nj->ni", prev, np.stack([np.zeros_like(a), np.cos(a), np.sin(a)], axis=1)
    )
    tangent = rod.rotations[1:, :, 2]
    grad = np.empty((rod.size, 3))
    grad[:, 0] = stiffness * a - np.einsum("ni,ni->n", axis_a, moment)
    grad[:, 1] = stiffness * b - np.einsum("ni,ni->n", axis_b, moment)
    grad[:, 2] = rod.element_lengths * (
        rod.axial * rod.strains - np.einsum("ni,ni->n", tangent, carried)
    )
    return grad


def dense_equilibrium(
    rod: DenseRod,
    loads: Sequence[PointLoad] = (),
    gravity: Sequence[float] = (0.0, 0.0, 0.0),
    tendons: Sequence[RodTendon] = (),
) -> DenseRod:
    """Equilibrium of the rod under dead loads and fixed tendon tensions."""
    forces, couples = _node_loads(rod, loads, gravity)
    carried = _after(forces)
    scale = _load_scale(rod, forces, couples, tendons)
    length = float(rod.element_lengths.sum())
    moment_scale = scale * length
    lever = rod.base.rotation[:, 2] * np.cumsum(
        np.concatenate([[0.0], rod.element_lengths])
    )[:, None]
    # Straight-rod moment of the dead loads about the clamp.
    moment_guess = (np.cross(lever, forces) + couples).sum(axis=0)

    def closure(factor: float, guess: np.ndarray) -> np.ndarray | None:
        scaled = [replace(t, tension=t.tension * factor) for t in tendons]

        def free_end(x: np.ndarray) -> np.ndarray:
            end, _, _ = _shoot(
                rod, factor * carried, factor * couples, scaled, x * moment_scale
            )
            return end / moment_scale

        sol = root(free_end, guess / moment_scale, method="hybr", options={"xtol": 1e-14})
        if not np.all(np.isfinite(sol.x)):
            return None
        if np.linalg.norm(free_end(sol.x)) > 1e-11:
            return None
        return sol.x * moment_scale

    moment0 = closure(1.0, moment_guess)
    if moment0 is None:
        logger.debug("direct shooting failed, continuing the load in steps")
        for steps in (4, 16, 64):
            guess = np.zeros(3)
            for k in range(1, steps + 1):
                guess = closure(k / steps, guess * k / max(k - 1, 1))
                if guess is None:
                    break
            if guess is not None:
                moment0 = guess
                break
    if moment0 is None:
        raise OracleError("dense rod shooting did not converge")

    _, joints, strains = _shoot(rod, carried, couples, tendons, moment0)
    solved = replace(rod, joints=joints, strains=strains)
    grad = equilibrium_gradient(solved, loads, gravity, tendons)
    norm = float(np.linalg.norm(grad))
    if norm > GRADIENT_TOL * moment_scale:
        raise OracleError(
            f"dense rod gradient {norm:.3e} exceeds {GRADIENT_TOL * moment_scale:.3e}"
        )
    return solved


def ground_truth(
    problem: StaticsProblem,
    elements_per_segment: int = 200,
    base: RigidTransform | None = None,
    max_iterations: int = 200,
) -> DenseRod:
    """Oracle equilibrium of ``problem``; tendon tensions follow the PD law."""
    rod = DenseRod.from_params(problem.segments, elements_per_segment, base)
    if not problem.routing or problem.command is None:
        return dense_equilibrium(rod, problem.loads, problem.gravity)
    tensions = np.zeros(len(problem.routing))
    for _ in range(max_iterations):
        tendons = rod.rod_tendons(problem.routing, tensions)
        solved = dense_equilibrium(rod, problem.loads, problem.gravity, tendons)
        updated = oracle_tensions(solved, problem.routing, problem.command)
        if np.max(np.abs(updated - tensions)) < TENSION_TOL:
            return solved
        tensions = updated
    raise OracleError("tendon tensions of the dense rod did not settle")


@dataclass(frozen=True)
class MarkerSet:
    """Measured marker positions in the base frame."""

    segments: np.ndarray
    stations: np.ndarray
    positions: np.ndarray

    def point(self, segment: int, s: float) -> tuple[np.ndarray, np.ndarray | None]:
        hit = np.flatnonzero((self.segments == segment) & np.isclose(self.stations, s))
        if hit.size == 0:
            raise OracleError(f"no marker at segment {segment}, s = {s}")
        return self.positions[hit[0]], None

    def curve(self) -> np.ndarray:
        return self.positions.copy()

    def labels(self) -> list[tuple[int, float]]:
        return [(int(k), float(s)) for k, s in zip(self.segments, self.stations)]


class ErrorReport(BaseModel):
    """Reconstruction errors of one reduced-order model against ground truth."""

    model_config = ConfigDict(frozen=True)

    model: ModelKind
    tip_position_error: float = Field(ge=0, description="[m]")
    orientation_geodesic: float | None = Field(None, ge=0, description="[rad]")
    orientation_frobenius: float | None = Field(None, ge=0)
    marker_stations: list[tuple[int, float]] = Field(default_factory=list)
    marker_errors: list[float] = Field(default_factory=list, description="[m]")
    state: RobotState
    iterations: int = 0
    residual_norm: float = 0.0


def orientation_errors(model: np.ndarray, truth: np.ndarray) -> tuple[float, float]:
    """Geodesic angle and Frobenius norm of R_model - R_truth."""
    frobenius = float(np.linalg.norm(model - truth))
    ratio = min(frobenius / (2.0 * math.sqrt(2.0)), 1.0)
    return 2.0 * math.asin(ratio), frobenius


def _default_stations(n: int) -> list[tuple[int, float]]:
    return [(k, s) for k in range(n) for s in MARKER_STATIONS]


def compare_models(
    problem: StaticsProblem,
    truth: DenseRod | MarkerSet,
    stations: Sequence[tuple[int, float]] | None = None,
    options: SolverOptions | None = None,
    base: RigidTransform | None = None,
) -> tuple[ErrorReport, ErrorReport]:
    """Solve ``problem`` with PAC and PCC and score both against ``truth``."""
    n = len(problem.segments)
    if stations is None:
        stations = truth.labels() if isinstance(truth, MarkerSet) else _default_stations(n)
    truth_tip, truth_rot = truth.point(n - 1, 1.0)
    reports = []
    for kind in (ModelKind.PAC, ModelKind.PCC):
        q0 = problem.initial_state.vector()
        if kind is ModelKind.PCC:
            q0[1::4] = 0.0
        start = problem.model_copy(update={"initial_state": RobotState.from_vector(q0)})
        state, report = solve_statics(start, options, kind, base)
        tip = robot_fk(state, problem.segments, base)[-1]
        geodesic = frobenius = None
        if truth_rot is not None:
            geodesic, frobenius = orientation_errors(tip.rotation, truth_rot)
        errors = []
        for k, s in stations:
            predicted = point_pose(state, problem.segments, k, s, base).translation
            errors.append(float(np.linalg.norm(predicted - truth.point(k, s)[0])))
        reports.append(
            ErrorReport(
                model=kind,
                tip_position_error=float(np.linalg.norm(tip.translation - truth_tip)),
                orientation_geodesic=geodesic,
                orientation_frobenius=frobenius,
                marker_stations=[(int(k), float(s)) for k, s in stations],
                marker_errors=errors,
                state=state,
                iterations=report.iterations,
                residual_norm=report.residual_norm,
            )
        )
        logger.info(
            "%s tip error %.3e m", kind.value, reports[-1].tip_position_error
        )
    return reports[0], reports[1]


def arc_stations(
    curve: np.ndarray, params: Sequence[SegmentParams], base: RigidTransform | None = None
) -> np.ndarray:
    """Label curve points with (segment, s) by arc length from the base."""
    origin = (base or RigidTransform.identity()).translation
    steps = np.linalg.norm(np.diff(np.vstack([origin, curve]), axis=0), axis=1)
    arc = np.cumsum(steps)
    total = arc[-1]
    if total <= 0.0:
        raise OracleError("curve has zero length")
    lengths = rest_lengths(params)
    bounds = np.cumsum(lengths) / lengths.sum() * total
    starts = np.concatenate([[0.0], bounds[:-1]])
    segment = np.minimum(np.searchsorted(bounds, arc - 1e-12 * total), lengths.size - 1)
    s = (arc - starts[segment]) / (bounds[segment] - starts[segment])
    return np.column_stack([segment, np.clip(s, 0.0, 1.0)])


class _CurveModel:
    """Batched model positions at fixed (segment, s) labels."""

    def __init__(
        self,
        labels: np.ndarray,
        params: Sequence[SegmentParams],
        base: RigidTransform | None,
    ) -> None:
        self.segments = labels[:, 0].astype(int)
        self.stations = labels[:, 1]
        self.lengths = rest_lengths(params)
        self.base = base

    def positions(self, batch: np.ndarray) -> np.ndarray:
        frames = chain_frames(batch, self.lengths, self.base)
        out = np.empty((batch.shape[0], self.segments.size, 3))
        for k in range(self.lengths.size):
            mask = self.segments == k
            if mask.any():
                _, pos = segment_points(batch, self.lengths, frames, k, self.stations[mask])
                out[:, mask] = pos
        return out

    def fit(
        self, points: np.ndarray, q0: np.ndarray, free: np.ndarray
    ) -> tuple[np.ndarray, float]:
        def assemble(y: np.ndarray) -> np.ndarray:
            q = q0.copy()
            q[free] = y
            return q

        def residual(y: np.ndarray) -> np.ndarray:
            return (self.positions(assemble(y)[None, :])[0] - points).ravel()

        def jacobian(y: np.ndarray) -> np.ndarray:
            stack, widths = central_stack(assemble(y), free)
            derivative = central_difference(self.positions(stack), widths)
            return derivative.reshape(free.size, -1).T

        lower = np.full(q0.size, -np.inf)
        lower[3::4] = -0.9 * self.lengths
        result = least_squares(
            residual,
            q0[free],
            jac=jacobian,
            bounds=(lower[free], np.inf),
            method="trf",
            ftol=1e-14,
            xtol=1e-14,
            gtol=1e-14,
        )
        q = assemble(result.x)
        rms = math.sqrt(np.mean(np.sum((self.positions(q[None, :])[0] - points) ** 2, axis=1)))
        return q, rms


def _chord_guess(
    model: _CurveModel, points: np.ndarray, params: Sequence[SegmentParams]
) -> np.ndarray:
    """Constant-curvature guess per segment from its chord and arc length."""
    n = len(params)
    q = np.zeros(4 * n)
    for k in range(n):
        frames = chain_frames(q[None, :], model.lengths, model.base)
        rot, origin = frames[0][0, k], frames[1][0, k]
        mask = model.segments == k
        seg_points, seg_s = points[mask], model.stations[mask]
        last = int(np.argmax(seg_s))
        s_max = seg_s[last]
        if s_max <= 0.0:
            continue
        local = rot.T @ (seg_points[last] - origin)
        polyline = np.vstack([origin, seg_points[np.argsort(seg_s)]])
        arc = np.linalg.norm(np.diff(polyline, axis=0), axis=1).sum() / s_max
        lateral = math.hypot(local[0], local[1])
        theta = 2.0 * math.atan2(lateral, local[2])
        q[4 * k] = theta / s_max
        q[4 * k + 2] = math.atan2(local[1], local[0]) if lateral > 1e-12 * arc else 0.0
        q[4 * k + 3] = max(arc - params[k].rest_length, -0.5 * params[k].rest_length)
    return q


def fit_model(
    curve: Sequence[Sequence[float]] | np.ndarray,
    model_kind: ModelKind,
    params: Sequence[SegmentParams],
    stations: np.ndarray | None = None,
    base: RigidTransform | None = None,
) -> tuple[RobotState, float]:
    """Least-squares PAC or PCC state for a sampled centerline.

    PAC starts from the PCC fit and never returns a worse rms than it.
    """
    points = np.asarray(curve, dtype=float)
    if points.ndim != 2 or points.shape[1] != 3:
        raise OracleError("curve must be a list of 3-vectors")
    labels = arc_stations(points, params, base) if stations is None else np.asarray(stations, float)
    if labels.shape != (points.shape[0], 2):
        raise OracleError("one (segment, s) label per curve point is required")
    counts = np.bincount(labels[:, 0].astype(int), minlength=len(params))
    if counts.size > len(params) or np.any(counts < 4):
        raise OracleError("at least four curve points per segment are required")

    model = _CurveModel(labels, params, base)
    q0 = _chord_guess(model, points, params)
    n = len(params)
    q_pcc, rms_pcc = model.fit(points, q0, free_coordinates(n, ModelKind.PCC))
    if model_kind is ModelKind.PCC:
        return RobotState.from_vector(q_pcc), rms_pcc
    q_pac, rms_pac = model.fit(points, q_pcc, free_coordinates(n, ModelKind.PAC))
    if rms_pac > rms_pcc:
        return RobotState.from_vector(q_pcc), rms_pcc
    return RobotState.from_vector(q_pac), rms_pac


def oracle_tensions(
    rod: DenseRod, routing: Sequence[TendonRouting], command: TendonCommand
) -> np.ndarray:
    """Tensions the PD law commands for the rod's current tendon lengths."""
    return tendon_force(rod.tendon_lengths(routing), None, command)
