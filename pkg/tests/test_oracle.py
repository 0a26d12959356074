"""Tests for the oracle module."""

import math

import numpy as np
import pytest

from conftest import make_problem
from pac_sim.actuation import tendon_lengths
from pac_sim.geometry import rotation_from_alpha_phi
from pac_sim.kinematics import centerline, robot_fk
from pac_sim.models import (
    ModelKind,
    PointLoad,
    RobotDescription,
    RobotState,
    SegmentParams,
    TendonCommand,
)
from pac_sim.oracle import (
    DenseRod,
    MarkerSet,
    OracleError,
    compare_models,
    dense_equilibrium,
    equilibrium_gradient,
    fit_model,
    ground_truth,
    orientation_errors,
)


def _tip_force(force: tuple[float, float, float]) -> PointLoad:
    return PointLoad(segment=0, s=1.0, force=force)


def _cantilever_error(section: SegmentParams, elements: int, force: float) -> float:
    rod = DenseRod.from_params([section], elements)
    solved = dense_equilibrium(rod, [_tip_force((force, 0.0, 0.0))])
    bending = section.k_bending * section.rest_length
    expected = force * section.rest_length**3 / (3 * bending)
    return abs(solved.positions[-1, 0] - expected) / expected


def test_unloaded_rod_is_straight(section: SegmentParams):
    rod = dense_equilibrium(DenseRod.from_params([section]))
    assert np.allclose(rod.positions[-1], [0.0, 0.0, section.rest_length], atol=1e-12)
    assert rod.element_lengths.sum() == pytest.approx(section.rest_length)


def test_too_coarse_rod_is_rejected(section: SegmentParams):
    with pytest.raises(OracleError):
        DenseRod.from_params([section], 50)


def test_tip_moment_gives_constant_curvature(section: SegmentParams):
    bending = section.k_bending * section.rest_length
    moment = 0.3
    rod = DenseRod.from_params([section], 200)
    solved = dense_equilibrium(rod, [PointLoad(segment=0, s=1.0, moment=(0.0, moment, 0.0))])
    curvature = np.hypot(solved.joints[:, 0], solved.joints[:, 1]) / solved.element_lengths
    assert np.abs(curvature / (moment / bending) - 1.0).max() < 0.01


def test_tip_force_matches_cantilever(section: SegmentParams):
    force = 0.01 * 3 * section.k_bending / section.rest_length
    assert _cantilever_error(section, 200, force) < 0.02


def test_discretization_error_shrinks(section: SegmentParams):
    force = 0.001 * 3 * section.k_bending / section.rest_length
    errors = [_cantilever_error(section, n, force) for n in (100, 200, 400, 800)]
    assert all(b < a for a, b in zip(errors, errors[1:]))


def test_gradient_vanishes_only_at_equilibrium(section: SegmentParams):
    loads = [_tip_force((0.5, 0.2, 0.0))]
    gravity = (0.0, 0.0, 9.81)
    rod = DenseRod.from_params([section])
    solved = dense_equilibrium(rod, loads, gravity)
    assert np.linalg.norm(equilibrium_gradient(solved, loads, gravity)) < 1e-8
    assert np.linalg.norm(equilibrium_gradient(rod, loads, gravity)) > 1e-3


def test_multi_segment_rod(arm: list[SegmentParams]):
    rod = dense_equilibrium(
        DenseRod.from_params(arm, 100), [PointLoad(segment=2, force=(-0.5, 0.0, 0.0))]
    )
    assert rod.size == 300
    position, rotation = rod.point(1, 1.0)
    assert np.array_equal(position, rod.positions[200])
    assert rotation.shape == (3, 3)
    assert rod.positions[-1, 0] < 0.0


def test_fit_recovers_affine_state(section: SegmentParams):
    truth = np.array([0.8, -0.6, 0.4, 0.01])
    labels, points = centerline(truth, [section], samples=41)
    state, rms = fit_model(points, ModelKind.PAC, [section], stations=labels)
    assert rms < 1e-9
    assert np.abs(state.vector() - truth).max() < 1e-6


def test_fit_straight_curve(section: SegmentParams):
    labels, points = centerline(RobotState.zeros(1), [section], samples=21)
    for kind in ModelKind:
        state, rms = fit_model(points, kind, [section], stations=labels)
        assert rms < 1e-9
        assert abs(state.segments[0].c0) < 1e-6
        assert abs(state.segments[0].c1) < 1e-6


def test_fit_without_labels_uses_arc_length(section: SegmentParams):
    _, points = centerline(RobotState.from_vector([1.2, 0.0, -0.5, 0.0]), [section])
    state, rms = fit_model(points, ModelKind.PCC, [section])
    assert rms < 1e-4
    assert state.segments[0].c0 == pytest.approx(1.2, abs=1e-3)


def test_pac_fits_oracle_curves_better(section: SegmentParams):
    for force in (0.3, 0.6, 0.9):
        rod = dense_equilibrium(DenseRod.from_params([section]), [_tip_force((force, 0.0, 0.0))])
        _, pcc = fit_model(rod.curve(), ModelKind.PCC, [section], stations=rod.stations())
        _, pac = fit_model(rod.curve(), ModelKind.PAC, [section], stations=rod.stations())
        assert pac <= pcc
        assert pac < 0.2 * pcc


def test_fit_needs_enough_points(section: SegmentParams):
    with pytest.raises(OracleError):
        fit_model([[0, 0, 0], [0, 0, 0.1], [0, 0, 0.2]], ModelKind.PAC, [section])


def test_orientation_metrics_agree():
    for angle in (0.0, 0.3, 1.7, 3.0):
        geodesic, frobenius = orientation_errors(rotation_from_alpha_phi(angle, 0.0), np.eye(3))
        assert geodesic == pytest.approx(angle, abs=1e-7)
        assert frobenius == pytest.approx(2 * math.sqrt(2) * abs(math.sin(angle / 2)), abs=1e-12)


def test_straight_comparison_is_exact(section: SegmentParams):
    problem = make_problem([section])
    pac, pcc = compare_models(problem, ground_truth(problem))
    for report in (pac, pcc):
        assert report.tip_position_error < 1e-6
        assert report.orientation_geodesic < 1e-6
        assert len(report.marker_errors) == 2


def test_hanging_section_without_load(section: SegmentParams):
    problem = make_problem([section], gravity=(0.0, 0.0, 9.81))
    pac, pcc = compare_models(problem, ground_truth(problem))
    assert pac.tip_position_error < 1e-3
    assert pcc.tip_position_error < 1e-3


def test_pac_beats_pcc_under_lateral_tip_loads(section: SegmentParams):
    ratios = []
    for k, magnitude in enumerate(np.linspace(0.4, 1.2, 20)):
        azimuth = k * math.pi / 10
        force = (magnitude * math.cos(azimuth), magnitude * math.sin(azimuth), 0.0)
        # Slight bend toward the load: phi is undefined on a straight segment.
        start = RobotState.from_vector([0.01, 0.0, azimuth, 0.0])
        problem = make_problem([section], initial_state=start, loads=[_tip_force(force)])
        truth = ground_truth(problem)
        assert np.linalg.norm(truth.positions[-1, :2]) > 0.1 * section.rest_length
        pac, pcc = compare_models(problem, truth)
        ratios.append(pac.tip_position_error / pcc.tip_position_error)
    assert np.mean(ratios) <= 0.7


def test_marker_ground_truth_has_no_orientation(stiff_section: SegmentParams):
    problem = make_problem([stiff_section], loads=[_tip_force((0.5, 0.0, 0.0))])
    rod = ground_truth(problem)
    stations = [0.25, 0.5, 0.75, 1.0]
    markers = MarkerSet(
        segments=np.zeros(4, dtype=int),
        stations=np.array(stations),
        positions=np.array([rod.point(0, s)[0] for s in stations]),
    )
    pac, pcc = compare_models(problem, markers)
    assert pac.orientation_geodesic is None
    assert pcc.orientation_frobenius is None
    assert pac.marker_stations == [(0, s) for s in stations]
    assert max(pac.marker_errors) <= max(pcc.marker_errors)


def test_tendon_ground_truth_follows_pd_law(tendon_section: SegmentParams):
    robot = RobotDescription(segments=[tendon_section])
    routing = robot.routing()
    rest = tendon_lengths(RobotState.zeros(1), routing, [tendon_section])
    command = TendonCommand(targets=list(rest + np.array([0.01, 0.0, 0.0])))
    problem = make_problem([tendon_section], command=command)
    rod = ground_truth(problem)
    assert rod.positions[-1, 0] > 0.0
    pac, _ = compare_models(problem, rod)
    tip = robot_fk(pac.state, [tendon_section])[-1].translation
    assert tip[0] > 0.0
    assert pac.tip_position_error < 5e-3


def test_pac_never_fits_worse_than_pcc(section: SegmentParams, rng: np.random.Generator):
    for _ in range(50):
        magnitude = rng.uniform(0.05, 1.0)
        azimuth = rng.uniform(0.0, 2 * math.pi)
        force = (magnitude * math.cos(azimuth), magnitude * math.sin(azimuth), 0.0)
        rod = dense_equilibrium(DenseRod.from_params([section]), [_tip_force(force)])
        _, pcc = fit_model(rod.curve(), ModelKind.PCC, [section], stations=rod.stations())
        _, pac = fit_model(rod.curve(), ModelKind.PAC, [section], stations=rod.stations())
        assert pac <= pcc
        curvature = np.hypot(rod.joints[:, 0], rod.joints[:, 1]) / rod.element_lengths
        if np.ptp(curvature) > 1e-3 * curvature.max():
            assert pac < pcc


def test_unloaded_models_agree_with_each_other(tendon_section: SegmentParams):
    routing = RobotDescription(segments=[tendon_section]).routing()
    rest = tendon_lengths(RobotState.zeros(1), routing, [tendon_section])
    pac_errors, pcc_errors = [], []
    for offsets in ([0.01, 0.0, 0.0], [0.0, 0.008, 0.0], [0.006, 0.0, 0.006]):
        command = TendonCommand(targets=list(rest + np.array(offsets)))
        problem = make_problem([tendon_section], command=command)
        pac, pcc = compare_models(problem, ground_truth(problem))
        pac_errors.append(pac.tip_position_error)
        pcc_errors.append(pcc.tip_position_error)
    pac_mean, pcc_mean = np.mean(pac_errors), np.mean(pcc_errors)
    assert pac_mean <= 2 * pcc_mean + 1e-6
    assert pcc_mean <= 2 * pac_mean + 1e-6
