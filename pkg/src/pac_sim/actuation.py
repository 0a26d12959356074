"""Tendon geometry, the PD tension law and the actuation map A(q)."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from pac_sim.kinematics import (
    as_vector,
    central_difference,
    central_stack,
    chain_frames,
    check_configuration,
    rest_lengths,
    segment_points,
)
from pac_sim.models import RobotState, SegmentParams, TendonCommand, TendonRouting


class ActuationError(Exception):
    """Raised when a tendon routing or command does not fit the robot."""


def check_routing(
    routing: Sequence[TendonRouting], params: Sequence[SegmentParams]
) -> None:
    for j, tendon in enumerate(routing):
        if tendon.segment >= len(params):
            raise ActuationError(
                f"tendon {j} references missing segment {tendon.segment}"
            )
        if tendon.radius > params[tendon.segment].radius:
            raise ActuationError(f"tendon {j} lies outside its segment")


def guide_stations(tendon: TendonRouting) -> np.ndarray:
    """Guide stations with the segment base prepended."""
    stations = np.asarray(tendon.stations, dtype=float)
    if stations[0] > 0.0:
        stations = np.concatenate([[0.0], stations])
    return stations


def lengths_batch(
    batch: np.ndarray,
    lengths: np.ndarray,
    routing: Sequence[TendonRouting],
    frames: tuple[np.ndarray, np.ndarray],
) -> np.ndarray:
    """Tendon lengths (B, m) for every state of ``batch``."""
    out = np.zeros((batch.shape[0], len(routing)))
    for j, tendon in enumerate(routing):
        rot, pos = segment_points(
            batch, lengths, frames, tendon.segment, guide_stations(tendon)
        )
        offset = tendon.radius * np.array(
            [np.cos(tendon.azimuth), np.sin(tendon.azimuth), 0.0]
        )
        guides = pos + np.einsum("bkij,j->bki", rot, offset)
        out[:, j] = np.linalg.norm(np.diff(guides, axis=1), axis=-1).sum(axis=1)
    return out


def tendon_lengths(
    state: RobotState | Sequence[float],
    routing: Sequence[TendonRouting],
    params: Sequence[SegmentParams],
) -> np.ndarray:
    """Sum of straight runs between consecutive guides, per tendon."""
    q = as_vector(state)
    lengths = rest_lengths(params)
    check_configuration(q, lengths)
    check_routing(routing, params)
    frames = chain_frames(q[None, :], lengths)
    return lengths_batch(q[None, :], lengths, routing, frames)[0]


def tendon_force(
    l: Sequence[float],
    l_dot: Sequence[float] | None,
    command: TendonCommand,
) -> np.ndarray:
    """PD tension law, clamped at zero because tendons cannot push."""
    length = np.asarray(l, dtype=float)
    target = np.asarray(command.targets, dtype=float)
    if length.shape != target.shape:
        raise ActuationError(
            f"{length.size} tendon lengths for {target.size} targets"
        )
    rate = np.zeros_like(length) if l_dot is None else np.asarray(l_dot, float)
    target_rate = (
        np.zeros_like(length)
        if command.target_rates is None
        else np.asarray(command.target_rates, dtype=float)
    )
    tension = command.kd * (target_rate - rate) + command.kp * (target - length)
    return np.maximum(tension, 0.0)


def actuation_matrix(
    state: RobotState | Sequence[float],
    routing: Sequence[TendonRouting],
    params: Sequence[SegmentParams],
) -> np.ndarray:
    """A(q) = -(dl/dq)^T, shape (4n, m)."""
    q = as_vector(state)
    lengths = rest_lengths(params)
    check_configuration(q, lengths)
    check_routing(routing, params)
    if not routing:
        return np.zeros((q.size, 0))
    stack, widths = central_stack(q)
    frames = chain_frames(stack, lengths)
    return -central_difference(lengths_batch(stack, lengths, routing, frames), widths)
