"""Static residual and the damped-flow equilibrium solver."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import BDF, RK45
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigh

from pac_sim.actuation import check_routing, lengths_batch, tendon_force
from pac_sim.geometry import RigidTransform
from pac_sim.kinematics import (
    KinematicsError,
    as_vector,
    body_rates,
    central_difference,
    central_stack,
    chain_frames,
    check_configuration,
    rest_lengths,
    segment_points,
)
from pac_sim.mechanics import (
    GeneralizedForce,
    elastic_energy,
    elastic_force,
    gravity_potential,
    potential_batch,
    stiffness_matrix,
)
from pac_sim.models import (
    ModelKind,
    PointLoad,
    RobotState,
    SegmentParams,
    SolverOptions,
    StaticsProblem,
)

logger = logging.getLogger(__name__)

# Above this spread of damped relaxation rates the flow goes to the implicit stepper.
STIFF_RATIO = 10.0
JACOBIAN_STEP = 1e-5


class SolverError(Exception):
    """Raised when the damped flow does not reach equilibrium."""

    def __init__(
        self, message: str, best_state: RobotState, history: list[float]
    ) -> None:
        super().__init__(message)
        self.best_state = best_state
        self.history = history


@dataclass
class SolveReport:
    """Outcome of one equilibrium solve."""

    converged: bool
    iterations: int
    residual_norm: float
    evaluations: int
    model: ModelKind
    method: str = "RK45"
    history: list[float] = field(default_factory=list)
    path: list[np.ndarray] = field(default_factory=list)


def free_coordinates(n: int, model: ModelKind) -> np.ndarray:
    """Indices the solver may move; PCC freezes every c1."""
    idx = np.arange(4 * n)
    if model is ModelKind.PCC:
        return idx[idx % 4 != 1]
    return idx


def _load_wrench(
    load: PointLoad,
    batch: np.ndarray,
    lengths: np.ndarray,
    frames: tuple[np.ndarray, np.ndarray],
    widths: np.ndarray,
) -> np.ndarray:
    """J^T [f; m_body] over the perturbed coordinates; row 0 of batch is nominal."""
    rot, pos = segment_points(batch, lengths, frames, load.segment, load.s)
    rot, pos = rot[:, 0], pos[:, 0]
    linear = central_difference(pos[1:], widths)
    out = linear @ np.asarray(load.force, dtype=float)
    moment = np.asarray(load.moment, dtype=float)
    if np.any(moment):
        angular = body_rates(rot[0], central_difference(rot[1:], widths))
        out = out + angular @ (rot[0].T @ moment)
    return out


def _residual(
    q: np.ndarray,
    problem: StaticsProblem,
    lengths: np.ndarray,
    masses: np.ndarray,
    free: np.ndarray,
    base: RigidTransform | None,
) -> np.ndarray:
    """Residual on the ``free`` coordinates from a single batched sweep."""
    stack, widths = central_stack(q, free)
    batch = np.concatenate([q[None, :], stack])
    frames = chain_frames(batch, lengths, base)
    nominal = (frames[0][1:], frames[1][1:])

    out = -elastic_force(q, problem.stiffness)[free]
    gravity = np.asarray(problem.gravity, dtype=float)
    if np.any(gravity):
        potential = potential_batch(stack, lengths, masses, gravity, nominal)
        out -= central_difference(potential, widths)
    if problem.routing and problem.command is not None:
        tendon = lengths_batch(batch, lengths, problem.routing, frames)
        tension = tendon_force(tendon[0], None, problem.command)
        out -= central_difference(tendon[1:], widths) @ tension
    for load in problem.loads:
        out += _load_wrench(load, batch, lengths, frames, widths)
    return out


def static_residual(
    state: RobotState | Sequence[float],
    problem: StaticsProblem,
    base: RigidTransform | None = None,
) -> GeneralizedForce:
    """r(q) = A(q) f_act + sum J^T f_ext - G(q) - K(q); zero at equilibrium."""
    q = as_vector(state)
    lengths = rest_lengths(problem.segments)
    check_configuration(q, lengths)
    check_routing(problem.routing, problem.segments)
    masses = np.array([p.mass for p in problem.segments])
    return _residual(q, problem, lengths, masses, np.arange(q.size), base)


def apply_point_force(
    state: RobotState | Sequence[float],
    params: Sequence[SegmentParams],
    segment_index: int,
    s: float,
    force: Sequence[float],
    moment: Sequence[float] | None = None,
) -> GeneralizedForce:
    """Generalized force of a base-frame force (and couple) at a material point."""
    q = as_vector(state)
    lengths = rest_lengths(params)
    check_configuration(q, lengths)
    if not 0 <= segment_index < lengths.size:
        raise KinematicsError(f"segment index {segment_index} out of range")
    if not 0.0 <= s <= 1.0:
        raise KinematicsError(f"s = {s} outside [0, 1]")
    load = PointLoad(
        segment=segment_index,
        s=s,
        force=tuple(force),
        moment=tuple(moment) if moment is not None else (0.0, 0.0, 0.0),
    )
    stack, widths = central_stack(q)
    batch = np.concatenate([q[None, :], stack])
    frames = chain_frames(batch, lengths)
    return _load_wrench(load, batch, lengths, frames, widths)


def total_potential(
    state: RobotState | Sequence[float],
    problem: StaticsProblem,
    base: RigidTransform | None = None,
) -> float:
    """Elastic plus gravity energy minus the work of the dead point forces.

    Couples and tendons are not included.
    """
    q = as_vector(state)
    lengths = rest_lengths(problem.segments)
    check_configuration(q, lengths)
    energy = elastic_energy(q, problem.stiffness)
    energy += gravity_potential(q, problem.segments, problem.gravity, base)
    frames = chain_frames(q[None, :], lengths, base)
    for load in problem.loads:
        _, pos = segment_points(q[None, :], lengths, frames, load.segment, load.s)
        energy -= float(pos[0, 0] @ np.asarray(load.force, dtype=float))
    return energy


def damping_matrix(
    problem: StaticsProblem, options: SolverOptions, q: np.ndarray
) -> np.ndarray:
    n = len(problem.segments)
    if options.damping_matrix is not None:
        matrix = np.asarray(options.damping_matrix, dtype=float)
        if matrix.shape != (4 * n, 4 * n):
            raise SolverError(
                f"damping matrix must be {4 * n}x{4 * n}", problem.initial_state, []
            )
        if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-12):
            raise SolverError(
                "damping matrix must be symmetric", problem.initial_state, []
            )
        return matrix
    if options.damping == "diagonal":
        return np.diag(np.tile(np.asarray(options.damping_weights, dtype=float), n))
    return stiffness_matrix(q, problem.stiffness)


def flow_stiffness_ratio(
    problem: StaticsProblem, damping: np.ndarray, free: np.ndarray, q: np.ndarray
) -> float:
    """Spread of the relaxation rates of D q' = -K q on the ``free`` coordinates."""
    stiffness = stiffness_matrix(q, problem.stiffness)[np.ix_(free, free)]
    rates = eigh(stiffness, damping, eigvals_only=True)
    return float(rates.max() / rates.min())


def _stepper(options: SolverOptions, ratio: float) -> str:
    if options.method != "auto":
        return options.method
    return "BDF" if ratio > STIFF_RATIO else "RK45"


def solve_statics(
    problem: StaticsProblem,
    options: SolverOptions | None = None,
    model: ModelKind = ModelKind.PAC,
    base: RigidTransform | None = None,
) -> tuple[RobotState, SolveReport]:
    """Integrate D q' = r(q) from the initial guess until the residual vanishes.

    The equilibrium reached is the one the flow converges to from
    ``problem.initial_state``; no global search is made. Well-conditioned flows
    use the explicit Dormand-Prince pair; stiff ones (the diagonal damping on a
    soft arm) use BDF with a central-difference Jacobian.
    """
    options = options or SolverOptions()
    q0 = problem.initial_state.vector()
    lengths = rest_lengths(problem.segments)
    check_configuration(q0, lengths)
    check_routing(problem.routing, problem.segments)
    if model is ModelKind.PCC and np.any(q0[1::4] != 0.0):
        raise KinematicsError("PCC mode requires c1 = 0 in the initial state")

    masses = np.array([p.mass for p in problem.segments])
    free = free_coordinates(lengths.size, model)
    damping = damping_matrix(problem, options, q0)[np.ix_(free, free)]
    try:
        factor = cho_factor(damping)
    except LinAlgError as e:
        raise SolverError(
            "damping matrix is not positive definite", problem.initial_state, []
        ) from e
    method = _stepper(options, flow_stiffness_ratio(problem, damping, free, q0))

    evaluations = 0

    def assemble(y: np.ndarray) -> np.ndarray:
        q = q0.copy()
        q[free] = y
        return q

    def force(y: np.ndarray) -> np.ndarray:
        nonlocal evaluations
        evaluations += 1
        q = assemble(y)
        check_configuration(q, lengths)
        return _residual(q, problem, lengths, masses, free, base)

    def flow(_t: float, y: np.ndarray) -> np.ndarray:
        return cho_solve(factor, force(y))

    def flow_jacobian(_t: float, y: np.ndarray) -> np.ndarray:
        steps = JACOBIAN_STEP * np.maximum(1.0, np.abs(y))
        columns = []
        for j, h in enumerate(steps):
            plus, minus = y.copy(), y.copy()
            plus[j] += h
            minus[j] -= h
            columns.append((force(plus) - force(minus)) / (plus[j] - minus[j]))
        return cho_solve(factor, np.column_stack(columns))

    residual = _residual(q0, problem, lengths, masses, free, base)
    norm = float(np.linalg.norm(residual))
    history = [norm]
    path = [q0.copy()] if options.record_path else []
    best_norm, best_q = norm, q0.copy()

    def report(converged: bool, iterations: int) -> SolveReport:
        return SolveReport(
            converged=converged,
            iterations=iterations,
            residual_norm=best_norm if converged else norm,
            evaluations=evaluations,
            model=model,
            method=method,
            history=history,
            path=path,
        )

    if norm < options.residual_tolerance:
        logger.debug("initial state already in equilibrium (|r| = %.3e)", norm)
        return RobotState.from_vector(q0), report(True, 0)

    try:
        if method == "BDF":
            integrator = BDF(
                flow,
                0.0,
                q0[free],
                np.inf,
                first_step=options.initial_step,
                rtol=options.relative_step_tolerance,
                atol=options.step_tolerance,
                jac=flow_jacobian,
            )
        else:
            integrator = RK45(
                flow,
                0.0,
                q0[free],
                np.inf,
                first_step=options.initial_step,
                max_step=options.max_step,
                rtol=options.relative_step_tolerance,
                atol=options.step_tolerance,
            )
    except KinematicsError as e:
        raise SolverError(
            f"flow left the admissible configurations: {e}", problem.initial_state, history
        ) from e
    logger.debug("%s flow with %s stepper", model.value, method)

    for iteration in range(1, options.max_iterations + 1):
        try:
            message = integrator.step()
            if integrator.status == "failed":
                raise SolverError(
                    f"step control failed: {message}", RobotState.from_vector(best_q), history
                )
            # RK45 keeps the rate at the accepted point; BDF does not.
            rate = integrator.f if method == "RK45" else flow(integrator.t, integrator.y)
        except KinematicsError as e:
            raise SolverError(
                f"flow left the admissible configurations: {e}",
                RobotState.from_vector(best_q),
                history,
            ) from e
        q = assemble(integrator.y)
        norm = float(np.linalg.norm(damping @ rate))
        history.append(norm)
        if options.record_path:
            path.append(q.copy())
        if norm < best_norm:
            best_norm, best_q = norm, q.copy()
        if norm < options.residual_tolerance:
            logger.info(
                "%s equilibrium after %d %s steps (|r| = %.3e)",
                model.value,
                iteration,
                method,
                norm,
            )
            return RobotState.from_vector(q), report(True, iteration)
    raise SolverError(
        f"no equilibrium after {len(history) - 1} steps, best |r| = {best_norm:.3e}",
        RobotState.from_vector(best_q),
        history,
    )
