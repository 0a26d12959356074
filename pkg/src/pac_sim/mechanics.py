"""Elastic and gravitational fields of the quasi-static balance."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from scipy.linalg import block_diag

from pac_sim.geometry import RigidTransform, adaptive_quadrature
from pac_sim.kinematics import (
    KinematicsError,
    as_vector,
    central_difference,
    central_stack,
    chain_frames,
    check_configuration,
    rest_lengths,
    segment_points,
)
from pac_sim.models import RobotState, SegmentParams, StiffnessModel

# A vector in configuration space, four entries per segment.
GeneralizedForce = np.ndarray

# Gram matrix of {1, s} on [0, 1].
HANKEL = np.array([[1.0, 0.5], [0.5, 1.0 / 3.0]])

GRAVITY_TOL = 1e-12


def stiffness_block(
    k_bending: float,
    k_torsion: float,
    k_axial: float,
    delta_l: float = 0.0,
    stiffening: float = 0.0,
) -> np.ndarray:
    """4x4 stiffness of one segment, blockdiag(k_b H, k_t, k_a)."""
    block = np.zeros((4, 4))
    block[:2, :2] = k_bending * (1.0 + stiffening * abs(delta_l)) * HANKEL
    block[2, 2] = k_torsion
    block[3, 3] = k_axial
    return block


def stiffness_matrix(
    state: RobotState | Sequence[float], model: StiffnessModel
) -> np.ndarray:
    q = as_vector(state)
    if q.size != 4 * len(model):
        raise KinematicsError(
            f"state has {q.size // 4} segments, stiffness model {len(model)}"
        )
    blocks = [
        stiffness_block(kb, kt, ka, q[4 * i + 3], model.stiffening)
        for i, (kb, kt, ka) in enumerate(
            zip(model.k_bending, model.k_torsion, model.k_axial)
        )
    ]
    return block_diag(*blocks)


def elastic_force(
    state: RobotState | Sequence[float], model: StiffnessModel
) -> GeneralizedForce:
    """Restoring force K(q) q."""
    q = as_vector(state)
    return stiffness_matrix(q, model) @ q


def elastic_energy(state: RobotState | Sequence[float], model: StiffnessModel) -> float:
    q = as_vector(state)
    return 0.5 * float(q @ stiffness_matrix(q, model) @ q)


def potential_batch(
    batch: np.ndarray,
    lengths: np.ndarray,
    masses: np.ndarray,
    gravity: np.ndarray,
    frames: tuple[np.ndarray, np.ndarray],
    tol: float = GRAVITY_TOL,
) -> np.ndarray:
    """Gravitational potential of every state in ``batch``.

    All states share one adaptive subdivision, which keeps finite differences
    taken across the batch smooth.
    """
    count = batch.shape[0]
    g = np.asarray(gravity, dtype=float)
    if not np.any(g) or not np.any(masses):
        return np.zeros(count)

    def integrand(s: np.ndarray) -> np.ndarray:
        total = np.zeros((s.size, count))
        for i, mass in enumerate(masses):
            if mass == 0.0:
                continue
            _, pos = segment_points(batch, lengths, frames, i, s)
            total += mass * np.einsum("bmj,j->mb", pos, -g)
        return total

    return np.asarray(adaptive_quadrature(integrand, 0.0, 1.0, tol=tol))


def gravity_potential(
    state: RobotState | Sequence[float],
    params: Sequence[SegmentParams],
    gravity: Sequence[float],
    base: RigidTransform | None = None,
) -> float:
    """Potential of the centerline-lumped segment masses, zero at the base."""
    q = as_vector(state)
    lengths = rest_lengths(params)
    check_configuration(q, lengths)
    masses = np.array([p.mass for p in params])
    frames = chain_frames(q[None, :], lengths, base)
    return float(potential_batch(q[None, :], lengths, masses, gravity, frames)[0])


def gravity_force(
    state: RobotState | Sequence[float],
    params: Sequence[SegmentParams],
    gravity: Sequence[float],
    base: RigidTransform | None = None,
) -> GeneralizedForce:
    """G(q), the configuration gradient of ``gravity_potential``."""
    q = as_vector(state)
    lengths = rest_lengths(params)
    check_configuration(q, lengths)
    masses = np.array([p.mass for p in params])
    stack, widths = central_stack(q)
    frames = chain_frames(stack, lengths, base)
    values = potential_batch(stack, lengths, masses, gravity, frames)
    return central_difference(values, widths)
