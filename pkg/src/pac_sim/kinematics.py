"""Forward kinematics and Jacobians of the piecewise affine curvature model.

Internally everything runs on batches of flat configuration vectors so that the
central-difference Jacobians used by the mechanics, actuation and solver modules
cost a single vectorized pass.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from pac_sim.geometry import RigidTransform, alpha_phi_matrices, arc_integral
from pac_sim.models import RobotState, SegmentParams, SegmentState

FD_STEP = 1e-6


class KinematicsError(Exception):
    """Raised for invalid configurations, indices or curve parameters."""


def as_vector(state: RobotState | SegmentState | Sequence[float] | np.ndarray) -> np.ndarray:
    """Flat configuration vector [c0, c1, phi, dL] per segment."""
    if isinstance(state, (RobotState, SegmentState)):
        return state.vector()
    q = np.asarray(state, dtype=float).ravel()
    if q.size == 0 or q.size % 4:
        raise KinematicsError(f"configuration length {q.size} is not a multiple of 4")
    return q


def rest_lengths(params: Sequence[SegmentParams]) -> np.ndarray:
    return np.array([p.rest_length for p in params], dtype=float)


def check_configuration(q: np.ndarray, lengths: np.ndarray) -> None:
    if q.size != 4 * lengths.size:
        raise KinematicsError(
            f"state has {q.size // 4} segments but {lengths.size} parameter sets"
        )
    effective = lengths + q[3::4]
    if np.any(effective <= 0) or not np.all(np.isfinite(q)):
        raise KinematicsError("segment length L + dL must stay positive and finite")


def _check_station(segment_index: int, s: float, n: int) -> None:
    if not 0 <= segment_index < n:
        raise KinematicsError(f"segment index {segment_index} outside [0, {n - 1}]")
    if not 0.0 <= s <= 1.0:
        raise KinematicsError(f"s = {s} outside [0, 1]")


def local_frames(
    c0: np.ndarray, c1: np.ndarray, phi: np.ndarray, ell: np.ndarray, s: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Rotations and translations of points of one segment in its base frame.

    The cross-section at s = 0 coincides with the base frame; the bending
    plane is rotated by ``phi`` about the base tangent.
    """
    c0, c1, phi, ell, s = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (c0, c1, phi, ell, s))
    )
    alpha = c0 * s + 0.5 * c1 * s**2
    integral = arc_integral(c0, c1, s)
    lateral = ell * integral.imag
    translation = np.stack(
        [np.cos(phi) * lateral, np.sin(phi) * lateral, ell * integral.real], axis=-1
    )
    rotation = alpha_phi_matrices(alpha, phi) @ alpha_phi_matrices(
        np.zeros_like(phi), -phi
    )
    return rotation, translation


def chain_frames(
    batch: np.ndarray, lengths: np.ndarray, base: RigidTransform | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Base frames of every segment plus the arm tip for a batch of states.

    ``batch`` has shape (B, 4n); returns rotations (B, n+1, 3, 3) and
    positions (B, n+1, 3) where index i is the base of segment i.
    """
    q = batch.reshape(batch.shape[0], -1, 4)
    count, n = q.shape[:2]
    ell = lengths[None, :] + q[..., 3]
    tip_rot, tip_pos = local_frames(q[..., 0], q[..., 1], q[..., 2], ell, 1.0)
    rot = np.empty((count, n + 1, 3, 3))
    pos = np.empty((count, n + 1, 3))
    base = base or RigidTransform.identity()
    rot[:, 0] = base.rotation
    pos[:, 0] = base.translation
    for i in range(n):
        rot[:, i + 1] = rot[:, i] @ tip_rot[:, i]
        pos[:, i + 1] = pos[:, i] + np.einsum("bij,bj->bi", rot[:, i], tip_pos[:, i])
    return rot, pos


def segment_points(
    batch: np.ndarray,
    lengths: np.ndarray,
    frames: tuple[np.ndarray, np.ndarray],
    segment_index: int,
    s: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """World rotations (B, m, 3, 3) and positions (B, m, 3) at stations ``s``."""
    q = batch.reshape(batch.shape[0], -1, 4)[:, segment_index]
    s = np.atleast_1d(np.asarray(s, dtype=float))
    ell = lengths[segment_index] + q[:, 3]
    rot, pos = local_frames(
        q[:, 0, None], q[:, 1, None], q[:, 2, None], ell[:, None], s[None, :]
    )
    base_rot, base_pos = frames[0][:, segment_index], frames[1][:, segment_index]
    world_rot = base_rot[:, None] @ rot
    world_pos = base_pos[:, None] + np.einsum("bij,bmj->bmi", base_rot, pos)
    return world_rot, world_pos


def central_stack(
    q: np.ndarray, free: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Plus/minus perturbations of ``q`` along the ``free`` coordinates.

    Returns the (2k, 4n) batch and the k actual step widths (plus - minus).
    """
    idx = np.arange(q.size) if free is None else np.asarray(free)
    rows = np.arange(idx.size)
    step = FD_STEP * np.maximum(1.0, np.abs(q[idx]))
    plus = np.repeat(q[None, :], idx.size, axis=0)
    minus = plus.copy()
    plus[rows, idx] += step
    minus[rows, idx] -= step
    return np.concatenate([plus, minus]), plus[rows, idx] - minus[rows, idx]


def central_difference(values: np.ndarray, widths: np.ndarray) -> np.ndarray:
    """Derivatives (k, ...) from values evaluated on a ``central_stack`` batch."""
    k = widths.size
    shape = (k,) + (1,) * (values.ndim - 1)
    return (values[:k] - values[k:]) / widths.reshape(shape)


def body_rates(rotation: np.ndarray, derivative: np.ndarray) -> np.ndarray:
    """Body angular velocities vee(R^T dR) for a stack of rotation derivatives."""
    omega = np.einsum("ji,...jk->...ik", rotation, derivative)
    skew = 0.5 * (omega - np.swapaxes(omega, -1, -2))
    return np.stack([skew[..., 2, 1], skew[..., 0, 2], skew[..., 1, 0]], axis=-1)


def segment_pose(
    state: SegmentState | Sequence[float], params: SegmentParams, s: float
) -> RigidTransform:
    """Pose of the point ``s`` of a single segment relative to its base."""
    q = as_vector(state)
    if q.size != 4:
        raise KinematicsError("segment_pose expects a single segment state")
    lengths = np.array([params.rest_length])
    check_configuration(q, lengths)
    _check_station(0, s, 1)
    rot, pos = local_frames(q[0], q[1], q[2], lengths[0] + q[3], s)
    return RigidTransform(rotation=rot, translation=pos)


def robot_fk(
    state: RobotState | Sequence[float],
    params: Sequence[SegmentParams],
    base: RigidTransform | None = None,
) -> list[RigidTransform]:
    """Base-frame transforms of every segment tip, proximal first."""
    q = as_vector(state)
    lengths = rest_lengths(params)
    check_configuration(q, lengths)
    rot, pos = chain_frames(q[None, :], lengths, base)
    return [
        RigidTransform(rotation=rot[0, i], translation=pos[0, i])
        for i in range(1, lengths.size + 1)
    ]


def point_pose(
    state: RobotState | Sequence[float],
    params: Sequence[SegmentParams],
    segment_index: int,
    s: float,
    base: RigidTransform | None = None,
) -> RigidTransform:
    q = as_vector(state)
    lengths = rest_lengths(params)
    check_configuration(q, lengths)
    _check_station(segment_index, s, lengths.size)
    frames = chain_frames(q[None, :], lengths, base)
    rot, pos = segment_points(q[None, :], lengths, frames, segment_index, s)
    return RigidTransform(rotation=rot[0, 0], translation=pos[0, 0])


def centerline(
    state: RobotState | Sequence[float],
    params: Sequence[SegmentParams],
    samples: int = 101,
    base: RigidTransform | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Sampled backbone: (segment, s) labels of shape (m, 2) and points (m, 3)."""
    if samples < 2:
        raise KinematicsError("at least two samples per segment are required")
    q = as_vector(state)
    lengths = rest_lengths(params)
    check_configuration(q, lengths)
    frames = chain_frames(q[None, :], lengths, base)
    grid = np.linspace(0.0, 1.0, samples)
    labels, points = [], []
    for i in range(lengths.size):
        _, pos = segment_points(q[None, :], lengths, frames, i, grid)
        labels.append(np.column_stack([np.full(samples, i), grid]))
        points.append(pos[0])
    return np.concatenate(labels), np.concatenate(points)


def point_jacobian(
    state: RobotState | Sequence[float],
    params: Sequence[SegmentParams],
    segment_index: int,
    s: float,
) -> np.ndarray:
    """6 x 4n Jacobian of the point (segment_index, s).

    Rows 0-2 are the base-frame position, rows 3-5 the body angular velocity.
    Columns of segments distal to the point are zero.
    """
    q = as_vector(state)
    lengths = rest_lengths(params)
    check_configuration(q, lengths)
    _check_station(segment_index, s, lengths.size)
    stack, widths = central_stack(q)
    batch = np.concatenate([q[None, :], stack])
    frames = chain_frames(batch, lengths)
    rot, pos = segment_points(batch, lengths, frames, segment_index, s)
    rot, pos = rot[:, 0], pos[:, 0]
    linear = central_difference(pos[1:], widths)
    angular = body_rates(rot[0], central_difference(rot[1:], widths))
    jacobian = np.vstack([linear.T, angular.T])
    jacobian[:, 4 * (segment_index + 1) :] = 0.0
    return jacobian
